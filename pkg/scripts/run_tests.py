"""
Run the test suite in stages: unit, fast integration, then the slow
numeric runs, and print a summary.

Usage:
    python scripts/run_tests.py            # unit + fast integration
    python scripts/run_tests.py --all      # also the slow numeric runs
    python scripts/run_tests.py --cov      # with coverage of execution/
"""
import sys
import io
sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding='utf-8')

import os
import subprocess

ROOT = os.path.dirname(os.path.abspath(__file__)) + "/.."

STAGES = [
    ("Unit tests", ["-m", "unit"]),
    ("Integration tests (fast)", ["-m", "integration and not slow"]),
]
SLOW_STAGE = ("Numeric runs (slow)", ["-m", "slow"])


def run_stage(name, marker_args, coverage):
    print(f"\n{name}")
    print("-" * 60)
    command = [sys.executable, "-m", "pytest", "-q"] + marker_args
    if coverage:
        command += ["--cov=execution", "--cov-append", "--cov-report=term-missing"]
    result = subprocess.run(command, cwd=ROOT)
    return result.returncode == 0


def main():
    stages = list(STAGES)
    if "--all" in sys.argv:
        stages.append(SLOW_STAGE)
    coverage = "--cov" in sys.argv

    print("=" * 60)
    print("FLOW CATEGORY TOOLS - TEST RUN")
    print("=" * 60)

    results = [(name, run_stage(name, args, coverage)) for name, args in stages]

    print("\n" + "=" * 60)
    print("TEST SUMMARY")
    print("=" * 60)
    passed = sum(1 for _, ok in results if ok)
    print(f"\nPassed: {passed}/{len(results)} stages")
    for name, ok in results:
        status = "✅ PASS" if ok else "❌ FAIL"
        print(f"  {status}: {name}")
    print("\n" + "=" * 60)
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
