"""HTTP explorer service tests against a live ephemeral server.

Each endpoint is checked differentially: the response body must be
byte-identical to the canonical JSON of the corresponding report function
called directly on the same model. Wire-level validation (400), library
errors (409/422), CORS, static files, and concurrent requests are covered
on real sockets via http.client.
"""

from __future__ import annotations

import contextlib
import http.client
import json
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from conjoint.marginals import fit_marginal
from conjoint.model import JointModel, LatentGaussian
from conjoint.service import (
    build_condition_report,
    canonical_json,
    make_server,
    mode_report,
    model_meta,
    sample_report,
)
from conjoint.specs import Block, Kind, MarginalKind, VariableSpec


@contextlib.contextmanager
def _serving(model, ui_dir=None):
    server = make_server(model, port=0, ui_dir=ui_dir)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server.server_address[:2]
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=10)


@pytest.fixture(scope="module")
def served(small_model):
    with _serving(small_model) as addr:
        yield addr, small_model


def _request(addr, method, path, body=None, headers=None):
    conn = http.client.HTTPConnection(*addr, timeout=60)
    try:
        conn.request(method, path, body=body, headers=headers or {})
        resp = conn.getresponse()
        data = resp.read()
        return resp.status, data, {k.lower(): v for k, v in resp.getheaders()}
    finally:
        conn.close()


def _get(addr, path):
    return _request(addr, "GET", path)


def _post_json(addr, obj):
    return _request(
        addr,
        "POST",
        "/condition",
        body=json.dumps(obj).encode("utf-8"),
        headers={"Content-Type": "application/json"},
    )


# ---------------------------------------------------------------------------
# GET /model/meta


def test_meta_endpoint_bytes(served):
    addr, model = served
    status, body, headers = _get(addr, "/model/meta")
    assert status == 200
    assert headers["content-type"] == "application/json; charset=utf-8"
    assert headers["access-control-allow-origin"] == "*"
    assert body == canonical_json(model_meta(model))


def test_meta_spec_entries(served):
    addr, model = served
    doc = json.loads(_get(addr, "/model/meta")[1])
    assert doc["kind"] == "model-meta"
    indicators = [s.name for s in model.specs if s.block.value == "indicator"]
    entries = doc["specs"]
    assert [e["name"] for e in entries] == indicators + ["shape", "feature"]
    assert entries[-2]["count"] == 3 * doc["vertex_count"]
    assert entries[-1]["count"] == doc["vertex_count"]
    by_name = {e["name"]: e for e in entries}
    assert by_name["sex"]["labels"] == ["female", "male"]
    assert by_name["sex"]["admissible"]["levels"] == [0.0, 1.0]
    age = by_name["age"]["admissible"]
    assert age["min"] < age["max"]
    assert doc["indicator_count"] == len(indicators)
    assert doc["rank"] == model.latent.rank
    assert len(doc["eigenvalues"]) == model.latent.rank


# ---------------------------------------------------------------------------
# POST /condition


def test_condition_endpoint_bytes(served):
    addr, model = served
    expected = canonical_json(
        build_condition_report(
            model,
            assignments={"age": 70.0},
            sigma=0.1,
            samples=200,
            modes=2,
            bins=10,
            seed=3,
        )
    )
    status, body, _ = _post_json(
        addr,
        {"assignments": {"age": 70.0}, "sigma": 0.1, "samples": 200,
         "modes": 2, "bins": 10, "seed": 3},
    )
    assert status == 200
    assert body == expected


def test_condition_label_assignment(served):
    addr, model = served
    expected = canonical_json(
        build_condition_report(model, assignments={"sex": "male"}, samples=50, modes=1)
    )
    by_label = _post_json(addr, {"assignments": {"sex": "male"}, "samples": 50, "modes": 1})
    by_level = _post_json(addr, {"assignments": {"sex": 1.0}, "samples": 50, "modes": 1})
    assert by_label[0] == by_level[0] == 200
    assert by_label[1] == expected
    assert by_label[1] == by_level[1]
    doc = json.loads(by_label[1])
    assert doc["request"]["assignments"] == {"sex": 1.0}


def test_condition_empty_body_is_unconditional(served):
    addr, model = served
    expected = canonical_json(build_condition_report(model))
    status, body, _ = _request(addr, "POST", "/condition")
    assert status == 200
    assert body == expected
    doc = json.loads(body)
    assert doc["observed"] == []
    assert doc["request"]["assignments"] == {}


def test_condition_rank_knob(served):
    addr, model = served
    expected = canonical_json(
        build_condition_report(
            model, assignments={"age": 64.0}, samples=0, modes=1, rank=5
        )
    )
    status, body, _ = _post_json(
        addr, {"assignments": {"age": 64.0}, "samples": 0, "modes": 1, "rank": 5}
    )
    assert status == 200
    assert body == expected
    assert json.loads(body)["request"]["rank"] == 5


def test_condition_block_sigma(served):
    addr, model = served
    sigma = {"indicator": 0.25, "feature": 0.1}
    expected = canonical_json(
        build_condition_report(
            model, assignments={"volume": 2.0}, sigma=sigma, samples=0, modes=0
        )
    )
    status, body, _ = _post_json(
        addr, {"assignments": {"volume": 2.0}, "sigma": sigma, "samples": 0, "modes": 0}
    )
    assert status == 200
    assert body == expected
    doc = json.loads(body)
    assert doc["request"]["sigma"] == {"coordinate": 0.0, "feature": 0.1, "indicator": 0.25}


# ---------------------------------------------------------------------------
# GET /mode and /sample


def test_mode_endpoint_bytes(served):
    addr, model = served
    status, body, _ = _get(addr, "/mode?k=1&t=2.0")
    assert status == 200
    assert body == canonical_json(mode_report(model, 1, 2.0))
    doc = json.loads(body)
    assert doc["k"] == 1
    assert doc["latent_norm"] == pytest.approx(
        2.0 * np.sqrt(model.latent.eigenvalues[0])
    )
    zero = json.loads(_get(addr, "/mode?k=1&t=0")[1])
    assert zero["latent_norm"] == 0.0


def test_sample_endpoint_bytes(served):
    addr, model = served
    status, body, _ = _get(addr, "/sample?n=5&seed=2&variables=age,volume")
    assert status == 200
    assert body == canonical_json(sample_report(model, ["age", "volume"], n=5, seed=2))
    doc = json.loads(body)
    assert doc["variables"] == ["age", "volume"]
    assert len(doc["values"]["age"]) == 5


def test_sample_endpoint_defaults(served):
    addr, model = served
    status, body, _ = _get(addr, "/sample")
    assert status == 200
    assert body == canonical_json(sample_report(model, None, n=100, seed=0))


# ---------------------------------------------------------------------------
# wire validation and error mapping


@pytest.mark.parametrize(
    "path",
    ["/mode?t=1.0", "/mode?k=1", "/mode?k=abc&t=1.0", "/mode?k=1&t=nope",
     "/sample?n=abc"],
)
def test_bad_query_parameters_return_400(served, path):
    addr, _ = served
    status, body, _ = _get(addr, path)
    assert status == 400
    assert json.loads(body)["error"] == "BadRequest"


@pytest.mark.parametrize(
    "raw, message_part",
    [
        (b"{nope", "not valid JSON"),
        (b"[1, 2]", "JSON object"),
        (b'{"assignments": [1]}', "assignments"),
        (b'{"sigma": "x"}', "sigma"),
        (b'{"sigma": {"coordinate": "x"}}', "sigma values"),
        (b'{"samples": "x"}', "samples"),
        (b'{"samples": true}', "samples"),
        (b'{"rank": 1.5}', "rank"),
        (b'{"rank": true}', "rank"),
    ],
)
def test_malformed_condition_bodies_return_400(served, raw, message_part):
    addr, _ = served
    status, body, _ = _request(
        addr, "POST", "/condition", body=raw,
        headers={"Content-Type": "application/json"},
    )
    assert status == 400
    doc = json.loads(body)
    assert doc["error"] == "BadRequest"
    assert message_part in doc["message"]


def test_invalid_content_length_returns_400(served):
    addr, _ = served
    conn = http.client.HTTPConnection(*addr, timeout=60)
    try:
        conn.putrequest("POST", "/condition")
        conn.putheader("Content-Length", "abc")
        conn.endheaders()
        resp = conn.getresponse()
        assert resp.status == 400
        assert json.loads(resp.read())["error"] == "BadRequest"
    finally:
        conn.close()


@pytest.mark.parametrize(
    "body, error",
    [
        ({"assignments": {"ghost": 1.0}}, "InvalidLevel"),
        ({"assignments": {"sex": "purple"}}, "InvalidLevel"),
        ({"assignments": {"age": None}}, "InvalidInput"),
        ({"assignments": {"age": 64.0}, "samples": -1}, "InvalidInput"),
        ({"assignments": {"age": 64.0}, "bins": 0}, "InvalidInput"),
        ({"sigma": {"coordinate": -1.0}}, "InvalidInput"),
        ({"sigma": {"bogus": 0.1}}, "InvalidInput"),
        ({"assignments": {"age": 64.0}, "rank": 0}, "InvalidRank"),
    ],
)
def test_library_errors_return_422(served, body, error):
    addr, _ = served
    status, payload, _ = _post_json(addr, body)
    assert status == 422
    doc = json.loads(payload)
    assert doc["kind"] == "error"
    assert doc["error"] == error


def test_mode_and_sample_library_errors(served):
    addr, _ = served
    status, body, _ = _get(addr, "/mode?k=99&t=1.0")
    assert status == 422
    assert json.loads(body)["error"] == "InvalidMode"
    status, body, _ = _get(addr, "/sample?n=0")
    assert status == 422
    assert json.loads(body)["error"] == "InvalidInput"
    status, body, _ = _get(addr, "/sample?variables=ghost")
    assert status == 422
    assert json.loads(body)["error"] == "InvalidTask"


def test_singular_conditioning_returns_409():
    s = 1.0 / np.sqrt(2.0)
    latent = LatentGaussian(
        mean=np.zeros(2),
        basis=np.array([[s], [s]]),
        eigenvalues=np.array([1.0]),
        jitter=0.0,
    )
    specs = tuple(
        VariableSpec(
            name=n, kind=Kind.CONTINUOUS, block=Block.INDICATOR,
            marginal=MarginalKind.GAUSSIAN,
        )
        for n in ("a", "b")
    )
    marginals = tuple(fit_marginal(np.array([-1.0, 0.0, 1.0]), sp) for sp in specs)
    model = JointModel(specs=specs, marginals=marginals, latent=latent)
    with _serving(model) as addr:
        status, body, _ = _post_json(
            addr,
            {"assignments": {"a": 1.0, "b": 1.0}, "samples": 0, "modes": 0},
        )
        assert status == 409
        assert json.loads(body)["error"] == "SingularConditioning"
        # observation noise regularizes the same request
        status, _, _ = _post_json(
            addr,
            {"assignments": {"a": 1.0, "b": 1.0}, "sigma": 0.1,
             "samples": 0, "modes": 0},
        )
        assert status == 200


def test_unknown_routes_return_404(served):
    addr, _ = served
    for method, path in (("GET", "/nope"), ("GET", "/condition"), ("POST", "/mode")):
        status, body, _ = _request(addr, method, path)
        assert status == 404
        assert json.loads(body)["error"] == "NotFound"


def test_options_preflight(served):
    addr, _ = served
    status, body, headers = _request(addr, "OPTIONS", "/condition")
    assert status == 204
    assert body == b""
    assert headers["access-control-allow-origin"] == "*"
    assert "POST" in headers["access-control-allow-methods"]


# ---------------------------------------------------------------------------
# report-level distribution properties


def test_unconditional_histograms_match_training_marginal(small_model):
    report = build_condition_report(small_model, samples=4000, bins=50, seed=2)
    hist = report["histograms"]["age"]
    edges = np.asarray(hist["edges"])
    masses = np.asarray(hist["masses"])
    assert abs(masses.sum() - 1.0) <= 1e-9
    # CDF of the sampled histogram vs the fitted marginal at the bin edges
    cdf_hist = np.concatenate([[0.0], np.cumsum(masses)])
    marginal = small_model.marginals[small_model.index_of("age")]
    cdf_model = np.asarray(marginal.cdf(edges))
    assert np.max(np.abs(cdf_hist - cdf_model)) < 0.08
    for entry in report["histograms"].values():
        assert abs(sum(entry["masses"]) - 1.0) <= 1e-9


def test_conditioned_indicator_stddev_collapses(small_model):
    base = build_condition_report(small_model, samples=0, modes=0)
    age = small_model.marginals[small_model.index_of("age")]
    observed = float(np.median(age.variant.values))
    report = build_condition_report(
        small_model,
        assignments={"age": observed, "sex": "male"},
        samples=0,
        modes=0,
    )
    # an exactly observed variable keeps only the jitter floor
    assert report["stddev"]["indicator"]["age"] <= 2e-3
    assert report["stddev"]["indicator"]["sex"] <= 2e-3
    for name, sd in report["stddev"]["indicator"].items():
        assert sd <= base["stddev"]["indicator"][name] + 1e-9
    assert report["prediction"]["indicators"]["age"] == pytest.approx(observed, abs=1e-9)


def test_mode_traversal_is_linear_in_latent_metric(small_model):
    from conjoint.model import principal_mode_instance

    latent = small_model.latent
    coord = small_model.layout.coordinate_slice
    u1 = latent.basis[:, 0]
    root = np.sqrt(latent.eigenvalues[0])

    def coord_latent(t):
        inst = principal_mode_instance(small_model, 1, t)
        z = small_model.tables.forward_matrix(inst[:, None])[:, 0]
        return z[coord]

    # the coordinate block is continuous, so forward(instance(t)) recovers the
    # latent line mean + t sqrt(lambda_1) u_1 exactly there
    for t in (0.5, 1.0):
        np.testing.assert_allclose(
            coord_latent(t), (latent.mean + t * root * u1)[coord], atol=1e-9
        )
    norm_half = np.linalg.norm(coord_latent(0.5) - latent.mean[coord])
    norm_full = np.linalg.norm(coord_latent(1.0) - latent.mean[coord])
    assert norm_full == pytest.approx(2.0 * norm_half, abs=1e-9)
    # opposite excursions average back to the mean
    np.testing.assert_allclose(
        0.5 * (coord_latent(0.75) + coord_latent(-0.75)), latent.mean[coord], atol=1e-9
    )


# ---------------------------------------------------------------------------
# concurrency


def test_concurrent_conditions_identical(served):
    addr, model = served
    payload = {"assignments": {"age": 65.0}, "samples": 200, "modes": 2,
               "bins": 8, "seed": 5}
    reference = _post_json(addr, payload)
    assert reference[0] == 200
    with ThreadPoolExecutor(max_workers=16) as pool:
        results = list(pool.map(lambda _: _post_json(addr, payload), range(16)))
    for status, body, _ in results:
        assert status == 200
        assert body == reference[1]


# ---------------------------------------------------------------------------
# static UI directory


def test_static_ui_serving(small_model, tmp_path):
    (tmp_path / "index.html").write_text("<html>explorer</html>", encoding="utf-8")
    (tmp_path / "app.js").write_text("console.log(1)", encoding="utf-8")
    outside = tmp_path.parent / "outside.txt"
    outside.write_text("secret", encoding="utf-8")
    with _serving(small_model, ui_dir=tmp_path) as addr:
        status, body, headers = _get(addr, "/")
        assert status == 200
        assert body == b"<html>explorer</html>"
        assert headers["content-type"].startswith("text/html")
        status, body, headers = _get(addr, "/app.js")
        assert status == 200
        assert body == b"console.log(1)"
        # API routes still take precedence over static files
        status, body, _ = _get(addr, "/model/meta")
        assert status == 200
        assert json.loads(body)["kind"] == "model-meta"
        # missing file and path traversal both 404
        assert _get(addr, "/missing.css")[0] == 404
        assert _get(addr, "/../outside.txt")[0] == 404
