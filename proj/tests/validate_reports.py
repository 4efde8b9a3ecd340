"""Run every bmal command on small generated data and validate report.json."""
import json
import math
import random
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def write_data(path, rows, seed):
    rng = random.Random(seed)
    with open(path, "w") as f:
        f.write("x1,x2,x3,y,grade\n")
        for _ in range(rows):
            x = [rng.gauss(0, 1) for _ in range(3)]
            t = 0.3 + 0.8 * x[0] - 0.5 * x[1]
            y = 1 if rng.random() < 1 / (1 + math.exp(-t)) else 0
            grade = 0 if t < -0.4 else (1 if t < 0.6 else 2)
            if rng.random() < 0.15:
                grade = rng.randrange(3)
            f.write(",".join(f"{v:.6f}" for v in x) + f",{y},{grade}\n")


def main():
    cli, schema_path = sys.argv[1], sys.argv[2]
    schema = json.loads(Path(schema_path).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)

    work = Path(tempfile.mkdtemp(prefix="bmal_schema_"))
    data = work / "data.csv"
    write_data(data, 300, 5)
    idx = work / "idx.txt"
    idx.write_text("\n".join(str(i) for i in range(0, 60, 3)) + "\n")
    missing = work / "missing.csv"
    missing.write_text("x1,x2\n1,2\n3,NA\n")

    common = ["--input", str(data), "--features", "x1,x2,x3", "--intercept"]
    runs = {
        "select": (common + ["select", "--n", "20"], 0),
        "select_logistic": (common + ["--model", "logistic", "--response", "y", "--p", "1", "select", "--n", "30"], 0),
        "select_cumlink": (["--input", str(data), "--features", "x1,x2,x3", "--model", "cumlink", "--response", "grade",
                            "--standardize", "select", "--n", "25"], 0),
        "efficiency": (common + ["efficiency", "--candidates", str(idx)], 0),
        "bench": (["--seed", "3", "--v", "1e-4", "bench", "--sizes", "300", "--k", "3", "--n", "30"], 0),
        "cross": (["--seed", "3", "cross-criteria", "--sizes", "400", "--k", "3", "--sample-sizes", "20,40"], 0),
        "two_stage": (common + ["--model", "logistic", "--response", "y", "--seed", "2", "two-stage", "--n", "100",
                                "--r", "0.5"], 0),
        "bootstrap": (common + ["--model", "logistic", "--response", "y", "--seed", "2", "bootstrap-eval", "--n", "100",
                                "--r", "0.5", "--B", "3"], 0),
        "error_parse": (["--input", str(missing), "select", "--n", "1"], 2),
        "error_missing": (["--input", str(work / "absent.csv"), "select", "--n", "5"], 2),
        "error_two_stage": (common + ["--model", "logistic", "--response", "y", "two-stage", "--n", "20", "--r", "0.1"], 5),
    }

    failures = 0
    for name, (args, expected) in runs.items():
        out = work / name
        proc = subprocess.run([cli, "--output-dir", str(out)] + args, capture_output=True, text=True)
        report_path = out / "report.json"
        if not report_path.exists():
            print(f"FAIL {name}: no report.json (exit {proc.returncode})\n{proc.stderr}")
            failures += 1
            continue
        report = json.loads(report_path.read_text())
        errors = sorted(validator.iter_errors(report), key=lambda e: list(e.path))
        status = proc.returncode == expected and not errors
        print(f"{'PASS' if status else 'FAIL'} {name}: exit {proc.returncode} (expected {expected})")
        for e in errors:
            print(f"  {list(e.path)}: {e.message}")
        if proc.returncode != expected:
            print(proc.stderr)
        failures += not status

    # The schema must reject a damaged report.
    damaged = json.loads((work / "select" / "report.json").read_text())
    del damaged["gap_ratio"]
    damaged["selected"].append(-1)
    rejected = not validator.is_valid(damaged)
    print(f"{'PASS' if rejected else 'FAIL'} damaged select report is rejected")
    failures += not rejected
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
