import os
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

JOBS = Path(__file__).parent / "jobs"

# criterion number -> (passed, seconds, note), filled by test_acceptance
ACCEPTANCE = {}


def run_cli(*args, module=False, check=None):
    """Run the installed console script (or ``python -m``) and return the CompletedProcess."""
    exe = shutil.which("hyperkernel")
    if module or exe is None:
        cmd = [sys.executable, "-m", "hyperkernel.cli", *map(str, args)]
    else:
        cmd = [exe, *map(str, args)]
    env = dict(os.environ)
    proc = subprocess.run(cmd, capture_output=True, text=True, env=env, timeout=600)
    if check is not None:
        assert proc.returncode == check, (proc.returncode, proc.stdout, proc.stderr)
    return proc


def result_block(stdout):
    """The key = value lines after the [result] marker."""
    lines = stdout.splitlines()
    out = {}
    if "[result]" not in lines:
        return out
    for line in lines[lines.index("[result]") + 1:]:
        key, _, val = line.partition(" = ")
        out[key.strip()] = val.strip()
    return out


@pytest.fixture
def jobs():
    return JOBS


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, secs, note = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({secs:.1f} s) {note}")
