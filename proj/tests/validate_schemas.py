# Copyright 2026 The crprobe Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Runs the toy pipeline through the CLI and validates every JSON output."""

import copy
import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema


def run(cli, *args):
    subprocess.run([cli, *args], check=True, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)


def main():
    cli, toy, schema_dir, work = sys.argv[1:5]
    work = pathlib.Path(work)
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    common = ["-c", f"{toy}/toy.cfg", "-s", f"output_dir={work}", "-s", "bpr.epochs=3"]
    run(cli, "ingest", *common)
    run(cli, "analyze", *common)
    run(cli, "run-model", *common)
    preds = work / "external.tsv"
    preds.write_text("0\tx1,x5,x2\n1\tx4,x2,x3\n2\tx2,x6,x3\n")
    run(cli, "audit-predictions", *common, "-p", str(preds))
    metrics = sorted(str(p) for p in (work / "models").glob("*/metrics.json"))
    run(cli, "compare-reports", *metrics, "--json", str(work / "comparison.json"))

    schemas = {}
    for path in pathlib.Path(schema_dir).glob("*.schema.json"):
        schema = json.loads(path.read_text())
        jsonschema.Draft202012Validator.check_schema(schema)
        schemas[schema["properties"]["kind"]["const"]] = jsonschema.Draft202012Validator(schema)

    failures = 0
    kinds = set()
    docs = sorted(work.rglob("*.json"))
    for path in docs:
        doc = json.loads(path.read_text())
        kind = doc.get("kind")
        kinds.add(kind)
        if kind not in schemas:
            print(f"FAIL {path}: no schema for kind {kind!r}")
            failures += 1
            continue
        errors = list(schemas[kind].iter_errors(doc))
        for e in errors:
            print(f"FAIL {path}: {'/'.join(map(str, e.path))}: {e.message}")
        failures += bool(errors)
        broken = copy.deepcopy(doc)
        broken["schema_version"] = 2
        if schemas[kind].is_valid(broken):
            print(f"FAIL {path}: schema accepts a wrong schema_version")
            failures += 1

    missing = set(schemas) - kinds
    if missing:
        print(f"FAIL no toy output of kind(s) {sorted(missing)}")
        failures += 1
    print(f"validated {len(docs)} documents of {len(kinds)} kinds, {failures} failures")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
