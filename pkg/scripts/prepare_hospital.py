"""Build the Hospital snapshot edge list and role labels from the raw contact list.

The raw SocioPatterns file (``t i j role_i role_j``, 20 s resolution) ships
inside the ``tnetwork`` wheel as ``Contacts_Hospital.csv``. Contacts are binned
into 210-minute snapshots (bin edges shifted 3000 s before the first contact)
and repeated contacts of a pair inside one snapshot collapse to one dynamic
edge. This yields 2,845 edges over 27 non-empty snapshots.

Usage:
    python scripts/prepare_hospital.py [RAW_FILE] [OUT_DIR]

Without RAW_FILE the wheel is fetched with ``pip download tnetwork``.
"""
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

BIN_SECONDS = 210 * 60
BIN_OFFSET = 3000


def fetch_raw() -> str:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "tnetwork==1.2", "-d", tmp],
            check=True,
        )
        wheel = next(Path(tmp).glob("tnetwork-*.whl"))
        with zipfile.ZipFile(wheel) as z:
            return z.read("tnetwork/dyn_graph/toy_data/Contacts_Hospital.csv").decode()


def main(argv):
    raw = Path(argv[1]).read_text() if len(argv) > 1 else fetch_raw()
    out_dir = Path(argv[2]) if len(argv) > 2 else Path(__file__).resolve().parents[1] / "data" / "hospital"
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = [line.split() for line in raw.splitlines() if line.strip()]
    t0 = min(int(r[0]) for r in rows)
    edges = []
    seen = set()
    roles = {}
    for ts, i, j, ri, rj in rows:
        roles[i], roles[j] = ri, rj
        snap = (int(ts) - t0 + BIN_OFFSET) // BIN_SECONDS
        key = (min(i, j, key=int), max(i, j, key=int), snap)
        if key not in seen:
            seen.add(key)
            edges.append(key)

    with open(out_dir / "edges.txt", "w") as fh:
        fh.write("# SocioPatterns hospital ward contacts, 210-minute snapshots\n")
        for a, b, snap in edges:
            fh.write(f"{a} {b} {snap}\n")
    with open(out_dir / "labels.txt", "w") as fh:
        for node in sorted(roles, key=int):
            fh.write(f"{node} {roles[node]}\n")
    snaps = {e[2] for e in edges}
    print(f"nodes={len(roles)} edges={len(edges)} timesteps={len(snaps)}")


if __name__ == "__main__":
    main(sys.argv)
