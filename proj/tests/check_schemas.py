"""Runs every subcommand on the fixture and validates the JSON it writes."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema


def main() -> int:
    tool, schemas, fixture = (pathlib.Path(a) for a in sys.argv[1:4])
    validators = {}
    for path in schemas.glob("*.schema.json"):
        schema = json.loads(path.read_text())
        jsonschema.Draft202012Validator.check_schema(schema)
        validators[path.name.removesuffix(".schema.json")] = jsonschema.Draft202012Validator(schema)

    with tempfile.TemporaryDirectory() as tmp:
        work = pathlib.Path(tmp)
        bars = work / "bars.csv"
        with fixture.open() as src:
            bars.write_text("".join(line for _, line in zip(range(5101), src)))

        def run(*args, code=0):
            proc = subprocess.run([str(tool), *args], capture_output=True, text=True)
            if proc.returncode != code:
                raise SystemExit(f"{args[0]} exited {proc.returncode}: {proc.stderr}")
            return proc

        run("analyze", "--input", str(bars), "--max-lag", "5", "--out", str(work / "an"))
        run("estimate", "--input", str(bars), "--states-r", "3", "--states-v", "3", "--bins", "2",
            "--out", str(work / "est"))
        model = str(work / "est" / "model.json")
        run("simulate", "--model", model, "--minutes", "2000", "--seed", "1", "--reference", str(bars),
            "--out", str(work / "sim"))
        run("fpt", "--model", model, "--rho", "1.01", "--psi", "3", "--horizon", "3", "--out", str(work / "fr"))
        run("fpt", "--model", model, "--rho", "1.01", "--psi", "3", "--horizon", "3", "--method", "mc",
            "--paths", "500", "--out", str(work / "fm"))
        run("optimize", "--input", str(bars), "--states", "3", "--lambdas", "0.9", "--max-lag", "5",
            "--reps", "1", "--out", str(work / "opt" / "o.json"))
        err = run("estimate", "--input", str(work / "missing.csv"), "--out", str(work / "x"), code=3)

        checks = [(json.loads(err.stderr), "error")]
        for doc in work.rglob("*.json"):
            data = json.loads(doc.read_text())
            checks.append((data, data["kind"]))
        failures = 0
        for data, kind in checks:
            name = "timing" if kind == "timing" else kind.removeprefix("wismc-")
            errors = sorted(validators[name].iter_errors(data), key=str)
            for e in errors:
                print(f"{kind}: {e.message} at {list(e.absolute_path)}")
            failures += bool(errors)
        print(f"{len(checks)} documents checked, {failures} invalid")
        return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
