#!/usr/bin/env python3
"""
CLI entry point for the TWATSP-ST Benders solver.

This script provides command-line access to instance generation, solving and benchmarking.
"""

from twatsp_benders.main import main

if __name__ == "__main__":
    exit(main())
