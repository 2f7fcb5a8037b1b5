#!/usr/bin/env -S uv run --script
# /// script
# requires-python = ">=3.10"
# dependencies = [
#     "click>=8.1.7",
#     "textual>=0.89.0",
#     "psutil>=5.9.0",
#     "numpy>=1.26",
#     "scipy>=1.11",
# ]
# ///

"""UV script wrapper for ssmi-lab."""

import sys
from pathlib import Path

# Add the project root to Python path for development
sys.path.insert(0, str(Path(__file__).parent))

from ssmi_lab.cli import cli

if __name__ == "__main__":
    cli()
