#!/usr/bin/env python3
"""
Bump or check the dynoframe version.

The version lives in one place, ``dynoframe/__init__.py``. ``pyproject.toml``
reads it through ``[tool.setuptools.dynamic]`` and ``setup.py`` parses it at
build time, so a release only rewrites ``__init__.py``.

Usage:
    python update_version.py 0.2.0      # set the version
    python update_version.py --check    # verify every file defers to __init__.py
"""

import argparse
import re
import sys
from pathlib import Path
from typing import List

PROJECT_ROOT = Path(__file__).parent
VERSION_FILE = Path("dynoframe") / "__init__.py"
VERSION_LINE = re.compile(r'^__version__ = "([^"]+)"$', flags=re.MULTILINE)
RELEASE_PATTERN = re.compile(r"^\d+\.\d+\.\d+(?:(?:a|b|rc)\d+)?$")


def read_version(root: Path = PROJECT_ROOT) -> str:
    match = VERSION_LINE.search((root / VERSION_FILE).read_text(encoding="utf-8"))
    if match is None:
        raise ValueError(f"no __version__ line in {VERSION_FILE}")
    return match.group(1)


def write_version(new_version: str, root: Path = PROJECT_ROOT) -> str:
    """Rewrite ``__version__`` and return the previous value."""
    if not RELEASE_PATTERN.match(new_version):
        raise ValueError(f"invalid version '{new_version}' (expected X.Y.Z, X.Y.ZrcN, ...)")
    path = root / VERSION_FILE
    content = path.read_text(encoding="utf-8")
    old_version = read_version(root)
    path.write_text(
        VERSION_LINE.sub(f'__version__ = "{new_version}"', content, count=1), encoding="utf-8"
    )
    return old_version


def check_sources(root: Path = PROJECT_ROOT) -> List[str]:
    """Problems that would let a build disagree with ``__init__.py``; empty when clean."""
    problems = []
    pyproject = (root / "pyproject.toml").read_text(encoding="utf-8")
    if re.search(r"^version\s*=", pyproject, flags=re.MULTILINE):
        problems.append("pyproject.toml pins a static version")
    if not re.search(r'^dynamic = \[[^\]]*"version"', pyproject, flags=re.MULTILINE):
        problems.append('pyproject.toml does not list "version" as dynamic')
    if 'version = {attr = "dynoframe.__version__"}' not in pyproject:
        problems.append("pyproject.toml does not read dynoframe.__version__")

    setup_py = root / "setup.py"
    if setup_py.exists():
        text = setup_py.read_text(encoding="utf-8")
        if re.search(r'version="[^"]+"', text):
            problems.append("setup.py pins a literal version")
        if str(VERSION_FILE.as_posix()) not in text:
            problems.append(f"setup.py does not read {VERSION_FILE.as_posix()}")
    return problems


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("version", nargs="?", help="new version, e.g. 0.2.0")
    group.add_argument("--check", action="store_true", help="verify the single version source")
    args = parser.parse_args(argv)

    problems = check_sources()
    if args.check:
        for problem in problems:
            print(f"error: {problem}", file=sys.stderr)
        if not problems:
            print(f"dynoframe {read_version()}: pyproject.toml and setup.py defer to __init__.py")
        return 1 if problems else 0

    if problems:
        print("refusing to bump; fix these first:", file=sys.stderr)
        for problem in problems:
            print(f"  {problem}", file=sys.stderr)
        return 1
    try:
        old_version = write_version(args.version)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    print(f"dynoframe {old_version} -> {args.version} ({VERSION_FILE.as_posix()})")
    print("Next: pytest tests/test_version_consistency.py && python -m build")
    return 0


if __name__ == "__main__":
    sys.exit(main())
