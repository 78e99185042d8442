"""
Console - Colored terminal output for the trigopt command line

Colors are dropped when stdout is not a terminal or NO_COLOR is set, so
piped output and captured test output stay plain.
"""

import os
import sys


class Colors:
    """ANSI color codes for terminal output."""

    RED = "\033[0;31m"
    GREEN = "\033[0;32m"
    YELLOW = "\033[1;33m"
    BLUE = "\033[0;34m"
    NC = "\033[0m"  # No Color


def _paint(color: str, text: str) -> str:
    if os.environ.get("NO_COLOR") or not sys.stdout.isatty():
        return text
    return f"{color}{text}{Colors.NC}"


def print_header(message: str) -> None:
    """Print a formatted header message."""
    rule = "=" * 70
    print(f"\n{_paint(Colors.BLUE, rule)}")
    print(_paint(Colors.BLUE, message))
    print(f"{_paint(Colors.BLUE, rule)}\n")


def print_success(message: str) -> None:
    print(f"{_paint(Colors.GREEN, '✓')} {message}")


def print_error(message: str) -> None:
    print(f"{_paint(Colors.RED, '✗')} {message}")


def print_warning(message: str) -> None:
    print(f"{_paint(Colors.YELLOW, '⚠')}  {message}")


def print_info(message: str) -> None:
    print(f"  {message}")


def print_table(text: str) -> None:
    """Print a pre-formatted table, indented like info lines."""
    for line in text.splitlines():
        print_info(line)
