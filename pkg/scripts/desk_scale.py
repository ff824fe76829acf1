#!/usr/bin/env python3
"""
Desk-scale MNIST comparison, averaged over seeds.

For each seed: train a DANO (k=4 by default) and a pure-VQC classifier on
the same feature set, then rescue the VQC run at its last epoch with a
diagonal readout (k=8 by default). Prints per-seed and mean test accuracies
and exits 1 when the DANO-over-VQC gap or the rescue gain is below its
threshold.

    python scripts/desk_scale.py --images train-images-idx3-ubyte --labels train-labels-idx1-ubyte
    python scripts/desk_scale.py --dataset data/mnist-desk.csv --seeds 0 1 2 --threads 8
"""
import argparse
import csv
import io
import json
import logging
import os
import sys
from contextlib import redirect_stdout
from pathlib import Path
from typing import Dict, List, Optional

# Run from anywhere: the repository root holds main.py
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from main import main as dano_main  # noqa: E402

logger = logging.getLogger("desk_scale")

TRAIN_ROWS = 1000
TEST_ROWS = 200
DANO_GAP = 0.10
RESCUE_GAIN = 0.05


def run(argv: List[str]) -> None:
    # Command summaries are read back from the run directories instead
    with redirect_stdout(io.StringIO()):
        status = dano_main(argv)
    if status != 0:
        raise SystemExit(f"{argv[0]} failed with exit status {status}")


def final_test_accuracy(run_dir: Path) -> float:
    with open(run_dir / "metrics.csv", newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    return float(rows[-1]["test_acc"])


def prepare(args: argparse.Namespace, out: Path) -> Path:
    if args.dataset:
        return Path(args.dataset)
    if not (args.images and args.labels):
        raise SystemExit("pass --dataset, or --images and --labels to build one")
    cache = out / "mnist-desk.csv"
    if not cache.is_file():
        run(["prep-data", "mnist", "--images", args.images, "--labels", args.labels,
             "--limit", str(TRAIN_ROWS + TEST_ROWS), "--test-count", str(TEST_ROWS), "--out", str(cache)])
    return cache


def one_seed(seed: int, dataset: Path, args: argparse.Namespace, out: Path) -> Dict[str, float]:
    common = ["--dataset", str(dataset), "--n", str(args.n), "--depth", str(args.depth),
              "--classes", str(args.classes), "--epochs", str(args.epochs), "--seed", str(seed),
              "--threads", str(args.threads), "--out", str(out)]
    dano_id, vqc_id = f"desk-dano-k{args.k}-s{seed}", f"desk-vqc-s{seed}"
    run(["train", "--mode", "dano", "--k", str(args.k), "--run-id", dano_id] + common)
    run(["train", "--mode", "vqc", "--run-id", vqc_id] + common)

    branch_id = f"{vqc_id}-rescue-k{args.rescue_k}"
    checkpoint = out / vqc_id / "checkpoints" / f"epoch_{args.epochs:04d}.json"
    run(["rescue", "--dataset", str(dataset), "--checkpoint", str(checkpoint), "--k", str(args.rescue_k),
         "--epochs", str(args.epochs + args.rescue_epochs), "--seed", str(seed), "--threads", str(args.threads),
         "--run-id", branch_id, "--out", str(out)])
    branch = json.loads((out / branch_id / "branch.json").read_text(encoding="utf-8"))

    return {
        "dano": final_test_accuracy(out / dano_id),
        "vqc": final_test_accuracy(out / vqc_id),
        "frozen_vqc": float(branch["frozen_vqc"]["test_accuracy"]),
        "rescued": final_test_accuracy(out / branch_id),
    }


def mean(values: List[float]) -> float:
    return sum(values) / len(values)


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--dataset", help="existing feature-set cache")
    parser.add_argument("--images")
    parser.add_argument("--labels")
    parser.add_argument("--out", default=os.path.join("runs", "desk-scale"))
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--rescue-epochs", type=int, default=20)
    parser.add_argument("--n", type=int, default=16)
    parser.add_argument("--classes", type=int, default=10)
    parser.add_argument("--k", type=int, default=4)
    parser.add_argument("--rescue-k", type=int, default=8)
    parser.add_argument("--depth", type=int, default=6)
    parser.add_argument("--threads", type=int, default=8)
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = prepare(args, out)

    per_seed = {seed: one_seed(seed, dataset, args, out) for seed in args.seeds}
    averages = {key: mean([result[key] for result in per_seed.values()]) for key in next(iter(per_seed.values()))}
    gap = averages["dano"] - averages["vqc"]
    gain = averages["rescued"] - averages["frozen_vqc"]
    summary = {
        "per_seed": per_seed,
        "mean": averages,
        "dano_minus_vqc": gap,
        "rescued_minus_frozen": gain,
        "dano_gap_ok": gap >= DANO_GAP,
        "rescue_gain_ok": gain >= RESCUE_GAIN,
    }
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    logger.info(f"DANO - VQC {gap:+.4f} (need {DANO_GAP}), rescued - frozen {gain:+.4f} (need {RESCUE_GAIN})")
    return 0 if summary["dano_gap_ok"] and summary["rescue_gain_ok"] else 1


if __name__ == "__main__":
    sys.exit(main())
