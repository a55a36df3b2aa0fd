#!/usr/bin/env python3
"""Run a fig8 command with --json and validate its report against a schema.

usage: check_json.py SCHEMA_DIR SCHEMA_NAME EXPECTED_EXIT [SUITES] -- COMMAND...

SUITES is a comma list; when given, a verify report must contain exactly those suites.
"""
import json
import pathlib
import subprocess
import sys

import jsonschema
from referencing import Registry, Resource


def main():
    schema_dir, name, expected = pathlib.Path(sys.argv[1]), sys.argv[2], int(sys.argv[3])
    sep = sys.argv.index("--")
    suites = sys.argv[4].split(",") if sep > 4 else None
    cmd = sys.argv[sep + 1:]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != expected:
        print(f"exit {proc.returncode}, expected {expected}\n{proc.stderr}")
        return 1
    resources = []
    for f in schema_dir.glob("*.schema.json"):
        s = json.loads(f.read_text())
        resources.append((f.name, Resource.from_contents(s)))
    registry = Registry().with_resources(resources)
    schema = json.loads((schema_dir / f"{name}.schema.json").read_text())
    report = json.loads(proc.stdout)
    jsonschema.Draft202012Validator(schema, registry=registry).validate(report)
    if suites is not None:
        got = [s["name"] for s in report["suites"]]
        if got != suites:
            print(f"suites {got}, expected {suites}")
            return 1
    print(f"{name}: report valid")
    return 0


if __name__ == "__main__":
    sys.exit(main())
