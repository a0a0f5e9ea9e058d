# pipeline/export_track.py
from __future__ import annotations
import argparse, os

from pcpolab.envs.track import generate_track, save_track


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=None, help="perturb straight lengths; omit for the nominal loop")
    ap.add_argument("--out", required=True, help="e.g. artifacts/track.txt")
    a = ap.parse_args()

    track = generate_track(a.seed)
    os.makedirs(os.path.dirname(a.out) or ".", exist_ok=True)
    save_track(a.out, track)
    print(f"[track] {track.n_segments} segments, length {track.total_length:.3f} m → {a.out}")


if __name__ == "__main__":
    main()
