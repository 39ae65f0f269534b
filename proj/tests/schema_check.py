# Copyright 2026 The PSM Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


"""Validates psm command output against docs/schemas."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema
import referencing

psm, corpus, schemas = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])

registry = referencing.Registry()
for path in schemas.glob("*.schema.json"):
    doc = json.loads(path.read_text())
    jsonschema.Draft202012Validator.check_schema(doc)
    registry = registry.with_resource(doc["$id"], referencing.Resource.from_contents(doc))


def check(schema, instance, label):
    doc = registry.contents(schema)
    jsonschema.Draft202012Validator(doc, registry=registry).validate(instance)
    print(f"ok {label}")


def psm_json(*args, expect=0):
    r = subprocess.run([psm, *args, "--json"], capture_output=True, text=True)
    if r.returncode != expect:
        sys.exit(f"psm {' '.join(args)} exited {r.returncode}: {r.stderr}")
    return json.loads(r.stdout if expect == 0 else r.stderr)


with tempfile.TemporaryDirectory() as tmp:
    d = pathlib.Path(tmp)
    src = str(corpus / "nutrition_advisor.ml0")
    subprocess.run([psm, "analyze", src, "-o", str(d / "m.json")], check=True, capture_output=True)
    subprocess.run([psm, "run", src, "--iterations", "2000", "-o", str(d / "t.jsonl")], check=True, capture_output=True)
    subprocess.run([psm, "run", src, "--entry", "invalid_weight", "-o", str(d / "live.jsonl")], check=True,
                   capture_output=True)
    subprocess.run([psm, "fit", str(d / "m.json"), str(d / "t.jsonl"), "-o", str(d / "b.psm")], check=True,
                   capture_output=True)
    b = str(d / "b.psm")

    check("bundle.schema.json", json.loads((d / "b.psm").read_text()), "bundle")
    check("network-view.schema.json", psm_json("show", b), "network view")
    check("node-view.schema.json", psm_json("show", b, "Person"), "type node view")
    check("node-view.schema.json", psm_json("show", b, "NutritionAdvisor.advice"), "executable node view")
    for q in ["P(Person.weight > 80)", "DIST(Person.weight | 169 < Person.height < 170)", "SAMPLE(Person, n=5)",
              "SCORE(Person.weight = -10)", "DIST([NutritionAdvisor.advice].return)", f'DIV(Person, other="{b}")']:
        check("query-result.schema.json", psm_json("query", b, q), q)
    check("anomaly-report.schema.json", psm_json("detect", b, "--node", "Person", "--value", "weight=-10"), "anomaly")
    check("anomaly-report.schema.json",
          psm_json("detect", b, "--node", "Person", "--value", "weight=-10", "--trace", str(d / "live.jsonl")),
          "anomaly with live trace")
    check("simulation-result.schema.json",
          psm_json("simulate", b, "--entry", "NutritionAdvisor.advice", "-n", "20", "--rows"), "simulation")
    check("compare-report.schema.json", psm_json("diff", b, b), "integrity diff")
    check("compare-report.schema.json", psm_json("diff", b, b, "--mode", "compatibility"), "compatibility diff")
    subprocess.run([psm, "gentest", b, "--target", "NutritionAdvisor.advice", "--stratum", "rare", "-n", "5", "-o",
                    str(d / "suite.json")], check=True, capture_output=True)
    check("test-suite.schema.json", json.loads((d / "suite.json").read_text()), "test suite")
    check("error.schema.json", psm_json("query", b, "P(Nope.x > 1)", expect=2), "error")

check("query-request.schema.json", {"query": "P(Person.weight > 80)", "seed": 3}, "text query request")
check("query-request.schema.json",
      {"kind": "probability", "node": "Person",
       "event": {"variable": "weight", "lo": 80.0, "hi": None, "lo_closed": False, "hi_closed": False}},
      "structured query request")
check("anomaly-request.schema.json", {"node": "Person", "values": {"weight": -10}, "tau": 0.1}, "anomaly request")
check("simulate-request.schema.json",
      {"entry": "NutritionAdvisor.advice", "n": 100, "overrides": {"height": 168.59, "weight": {"lo": 60, "hi": 70}}},
      "simulate request")
