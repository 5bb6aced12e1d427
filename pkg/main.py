"""
RegionAtlas entry point

    python main.py bounds --graph path3 --widths 2,2,3
    python main.py reproduce --out ./paper --fast
"""

from region_atlas.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
