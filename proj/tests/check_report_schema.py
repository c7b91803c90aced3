"""Validate report.json files written by `attiq run` against configs/report.schema.json."""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def run(cli, *args):
    subprocess.run([cli, *args], check=True, stdout=subprocess.DEVNULL)


def main():
    cli, schema_path = sys.argv[1], Path(sys.argv[2])
    schema = json.loads(schema_path.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        gains = tmp / "gains.json"
        run(cli, "synth", "--out", str(gains))
        runs = {
            "both": ["--case", "II", "--gains", str(gains)],
            "ekf": ["--case", "I", "--filters", "ekf"],
            "reps": ["--case", "III", "--reps", "2", "--gains", str(gains), "--init", "exact"],
        }
        failures = 0
        for name, args in runs.items():
            out = tmp / name
            run(cli, "run", *args, "--out", str(out))
            report = json.loads((out / "report.json").read_text())
            errors = sorted(validator.iter_errors(report), key=lambda e: list(e.path))
            for e in errors:
                print(f"{name}: {'/'.join(map(str, e.path))}: {e.message}")
            failures += len(errors)
            print(f"{name}: {'ok' if not errors else 'invalid'}")
        bad = json.loads((tmp / "both" / "report.json").read_text())
        bad["schema_version"] = 2
        if validator.is_valid(bad):
            print("schema accepted a wrong schema_version")
            failures += 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
