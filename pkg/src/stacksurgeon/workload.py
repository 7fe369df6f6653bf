"""Build and launch the bundled busy-loop workload used for live checks."""

import shutil
import subprocess
import sys
from importlib import resources
from pathlib import Path

CFLAGS = ["-O0", "-g", "-fno-omit-frame-pointer", "-fno-inline", "-fno-optimize-sibling-calls"]
# keeps the frame of the hot leaf so its caller shows up in frame-pointer unwinds
LEAF_FP = "-mno-omit-leaf-frame-pointer"


def compiler():
    for cc in ("cc", "gcc", "clang"):
        path = shutil.which(cc)
        if path:
            return path
    return None


def build_busyloop(dest_dir) -> Path:
    """Compile the workload into ``dest_dir`` and return the binary path."""
    cc = compiler()
    if cc is None:
        raise RuntimeError("no C compiler found")
    dest = Path(dest_dir)
    dest.mkdir(parents=True, exist_ok=True)
    src = dest / "busyloop.c"
    src.write_bytes(resources.files("stacksurgeon.data").joinpath("busyloop.c").read_bytes())
    out = dest / "busyloop"
    for flags in ([*CFLAGS, LEAF_FP], CFLAGS):
        proc = subprocess.run([cc, *flags, "-o", str(out), str(src)],
                              stdout=subprocess.PIPE, stderr=subprocess.STDOUT)
        if proc.returncode == 0:
            return out
    raise RuntimeError(f"compiling busyloop failed:\n{proc.stdout.decode(errors='replace')}")


def start_busyloop(binary, seconds, a_units=7, b_units=3) -> subprocess.Popen:
    return subprocess.Popen([str(binary), str(seconds), str(a_units), str(b_units)],
                            stdout=subprocess.DEVNULL, stderr=sys.stderr)


WORKLOAD_CONFIG = """\
# breakdown of the busy-loop workload
root run_workload
cat A spin_a
cat B spin_b
mode children
"""
