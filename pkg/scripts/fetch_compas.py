"""Download ProPublica's compas-scores-two-years.csv into data/.

Tries the ProPublica repository first. If that is unreachable, falls back to
the copy bundled in the ``responsibly`` wheel (fetched with pip, not installed).
"""

import argparse
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

URL = "https://raw.githubusercontent.com/propublica/compas-analysis/master/compas-scores-two-years.csv"
NAME = "compas-scores-two-years.csv"


def from_url(dest: Path) -> bool:
    try:
        with urllib.request.urlopen(URL, timeout=30) as resp:
            dest.write_bytes(resp.read())
        return True
    except OSError as exc:
        print(f"download failed: {exc}", file=sys.stderr)
        return False


def from_wheel(dest: Path) -> bool:
    with tempfile.TemporaryDirectory() as tmp:
        cmd = [sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:", "-d", tmp, "responsibly==0.1.2"]
        if subprocess.run(cmd, capture_output=True).returncode != 0:
            return False
        for wheel in Path(tmp).glob("*.whl"):
            with zipfile.ZipFile(wheel) as zf:
                for member in zf.namelist():
                    if member.endswith(NAME):
                        dest.write_bytes(zf.read(member))
                        return True
    return False


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dest", default=str(Path(__file__).resolve().parents[1] / "data" / NAME))
    args = parser.parse_args()
    dest = Path(args.dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    if from_url(dest) or from_wheel(dest):
        print(f"wrote {dest}")
        return 0
    print("could not obtain the COMPAS file", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
