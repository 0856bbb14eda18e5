#!/usr/bin/env python3
"""
Command-line interface for weighted discrete elliptic boundary value problems.
"""

import sys

# Add the project root to Python path
sys.path.insert(0, sys.path[0])

from weighted_bvp.app import run_cli  # noqa: E402

if __name__ == "__main__":
    sys.exit(run_cli())
