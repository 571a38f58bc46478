"""Validate every report.json below a directory against the published schema,
and check the column headers of the CSV artifacts next to it."""
import csv
import json
import pathlib
import sys

import jsonschema

HEADERS = {
    "replicates.csv": ["seed", "d", "m", "count", "certified", "residual_max", "wall_time_ms"],
    "chaos_variance.csv": ["q", "d", "value"],
    "field_samples.csv": None,
}


def main() -> int:
    schema = json.loads(pathlib.Path(sys.argv[1]).read_text())
    root = pathlib.Path(sys.argv[2])
    reports = sorted(root.rglob("report.json"))
    if not reports:
        print("no reports found under", root)
        return 1
    validator = jsonschema.Draft202012Validator(schema)
    failures = 0
    for path in reports:
        errors = list(validator.iter_errors(json.loads(path.read_text())))
        for e in errors:
            print(f"{path}: {e.message}")
        failures += bool(errors)
        for csv_path in path.parent.glob("*.csv"):
            with csv_path.open() as fh:
                header = next(csv.reader(fh))
            expected = HEADERS.get(csv_path.name)
            if csv_path.name.startswith("profile_"):
                expected = ["theta", "z", "d", "A", "B", "C", "D", "sigma2", "rho", "psi"]
            if csv_path.name.startswith("partition_"):
                expected = ["index_path", "center_angles", "radii"]
            if expected is not None and header != expected:
                print(f"{csv_path}: unexpected header {header}")
                failures += 1
        print(f"checked {path}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
