"""REST endpoints and the WebSocket protocol, exercised through the ASGI
test client against documents and images on disk."""

import base64
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from autostroke.model import (
    Document,
    Layer,
    StrokeSource,
    document_to_json,
    load_document,
    save_document,
)
from autostroke.region import rle_to_mask
from autostroke.render import document_to_svg
from autostroke.service import create_app
from autostroke.session import Session

from conftest import grid_strokes, make_dash, write_png


def make_workspace(tmp_path, n=5, iterations=3):
    rgb = np.full((160, 160, 3), 200, dtype=np.uint8)
    img_path = write_png(tmp_path / "ref.png", rgb)
    layer = Layer(id=0, name="layer 0", strokes=grid_strokes(n, 1, 60.0, 80.0, 8.0))
    doc = Document(image=img_path, layers=[layer])
    doc.params["iterations"] = iterations
    doc_path = str(tmp_path / "doc.json")
    save_document(doc, doc_path)
    return doc, doc_path


@pytest.fixture
def workspace(tmp_path):
    doc, doc_path = make_workspace(tmp_path)
    with TestClient(create_app(doc_path=doc_path)) as client:
        yield client, doc, tmp_path


def doc_payload(doc):
    return json.loads(document_to_json(doc))


def recv(ws, n):
    """Read exactly n frames and bucket them by type."""
    frames = {}
    for _ in range(n):
        f = ws.receive_json()
        frames.setdefault(f["type"], []).append(f)
    return frames


def add_stroke_and_wait(ws, seq, i=5):
    x = 60.0 + 8.0 * i
    ws.send_json(
        {
            "type": "stroke_added",
            "seq": seq,
            "stroke": {"points": [[x - 2.0, 80.0], [x + 2.0, 80.0]], "width": 2.0},
        }
    )
    return recv(ws, 2)  # committed plus the pipeline outcome, either order


# ------------------------------------------------------------------- REST
def test_health(workspace):
    client, _, _ = workspace
    body = client.get("/api/health").json()
    assert body == {"status": "ok", "protocol": 1}


def test_reference_endpoint_serves_the_image(workspace):
    client, _, _ = workspace
    resp = client.get("/api/reference")
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "image/png"
    assert resp.content[:8] == b"\x89PNG\r\n\x1a\n"

    bare = TestClient(create_app(doc_path=None))
    assert bare.get("/api/reference").status_code == 404


def test_synth_endpoint_is_deterministic(workspace):
    client, doc, _ = workspace
    req = {"document": doc_payload(doc), "seed": 3, "iterations": 3}
    first = client.post("/api/synth", json=req)
    second = client.post("/api/synth", json=req)
    assert first.status_code == 200
    a, b = first.json(), second.json()
    assert a == b
    assert a["count"] == len(a["committed_ids"]) > 20
    assert a["suppressed"] is None
    assert a["orientation_mode"] in ("global", "flow")
    assert len(a["triple"]) == 3
    mask = rle_to_mask(a["region"])
    assert mask.shape == (160, 160) and mask.any()
    got = json.dumps(a["document"])
    assert json.dumps(client.post("/api/synth", json=req).json()["document"]) == got


def test_synth_endpoint_suppresses_empty_documents(workspace, tmp_path):
    client, doc, _ = workspace
    empty = Document(image=doc.image, layers=[Layer(id=0, name="layer 0", strokes=[])])
    body = client.post("/api/synth", json={"document": doc_payload(empty)}).json()
    assert body["count"] == 0 and body["committed_ids"] == []
    assert body["suppressed"]
    assert body["document"] == doc_payload(empty)


def test_synth_endpoint_rejects_bad_documents(workspace):
    client, _, _ = workspace
    assert client.post("/api/synth", json={"document": {"layers": []}}).status_code == 422
    assert client.post("/api/synth", json={"document": "nope"}).status_code == 422
    bad_image = {"version": 1, "image": "/no/such/ref.png", "layers": []}
    assert client.post("/api/synth", json={"document": bad_image}).status_code == 422


def test_infer_endpoint(workspace):
    client, doc, _ = workspace
    body = client.post("/api/infer", json={"document": doc_payload(doc)}).json()
    assert body["exemplar"]["k"] == 5
    assert body["exemplar"]["stroke_ids"] == [0, 1, 2, 3, 4]
    assert body["exemplar"]["shared_features"] == ["color"]
    assert body["region"]["area"] > 0.5 * 160 * 160
    assert body["orientation_mode"] in ("global", "flow")
    assert body["radius"]["mode"] == "constant"
    assert body["radius"]["triple"] == [8.0, 0.0, 0.0]

    empty = Document(image=doc.image, layers=[Layer(id=0, name="layer 0", strokes=[])])
    body = client.post("/api/infer", json={"document": doc_payload(empty)}).json()
    assert body["exemplar"] is None


def test_render_endpoint_svg_and_png(workspace):
    client, doc, _ = workspace
    body = client.post(
        "/api/render", json={"document": doc_payload(doc), "format": "svg"}
    ).json()
    assert body["format"] == "svg"
    assert body["width"] == 160 and body["height"] == 160
    assert body["data"].startswith("<svg")
    assert body["data"].count("<polyline") == 5

    body = client.post("/api/render", json={"document": doc_payload(doc)}).json()
    assert body["format"] == "png"
    raw = base64.b64decode(body["data"])
    assert raw[:8] == b"\x89PNG\r\n\x1a\n"

    assert client.post("/api/render", json={"document": {"x": 1}}).status_code == 422


def test_render_provenance_recolors_autocompleted_strokes():
    auto = make_dash(1, 30.0, 30.0, 2.0, color=(9, 9, 9, 255))
    auto.source = StrokeSource.AUTOCOMPLETED
    doc = Document(
        image="missing.png",
        layers=[Layer(id=0, name="layer 0", strokes=[make_dash(0, 10.0, 10.0, 0.0), auto])],
    )
    markup = document_to_svg(doc, provenance=True)
    assert 'stroke="rgb(255,0,0)"' in markup  # autocompleted
    assert 'stroke="rgb(0,0,0)"' in markup  # manual
    plain = document_to_svg(doc, provenance=False)
    assert "rgb(255,0,0)" not in plain


def test_static_dir_is_served(tmp_path):
    _, doc_path = make_workspace(tmp_path)
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<html><body>canvas here</body></html>")
    with TestClient(create_app(doc_path=doc_path, static_dir=str(ui))) as client:
        page = client.get("/")
        assert page.status_code == 200 and "canvas here" in page.text


# -------------------------------------------------------------- WebSocket
def test_ws_hello_then_stroke_then_resolve(workspace):
    client, doc, _ = workspace
    with client.websocket_connect("/ws") as ws:
        hello = ws.receive_json()
        assert hello["type"] == "hello" and hello["seq"] == 0
        assert hello["protocol"] == 1
        assert hello["document"] == doc_payload(doc)
        assert hello["image"] == {"width": 160, "height": 160}
        assert hello["autocomplete"] is True and hello["autocolor"] is False

        frames = add_stroke_and_wait(ws, seq=1)
        committed = frames["committed"][0]
        assert committed["seq"] == 1 and committed["ids"] == [5]
        assert committed["indices"] == []
        suggestion = frames["suggestion"][0]
        assert suggestion["seq"] == 1 and suggestion["set_id"] == 1
        n = len(suggestion["strokes"])
        assert n > 20
        assert [s["id"] for s in suggestion["strokes"]] == list(range(n))
        assert all(s["source"] == "autocompleted" for s in suggestion["strokes"])
        assert all(len(p) == 4 for s in suggestion["strokes"] for p in s["points"])
        assert suggestion["exemplar_ids"] == [0, 1, 2, 3, 4, 5]
        assert len(suggestion["triple"]) == 3
        assert rle_to_mask(suggestion["region"]).shape == (160, 160)

        polygon = [[-1.0, -1.0], [80.5, -1.0], [80.5, 161.0], [-1.0, 161.0]]
        ws.send_json(
            {"type": "resolve", "seq": 2, "decision": "accept_lasso", "polygon": polygon}
        )
        partial = recv(ws, 1)["committed"][0]
        assert partial["seq"] == 2
        assert 0 < len(partial["ids"]) < n
        assert partial["remaining"] == n - len(partial["ids"])
        assert len(partial["indices"]) == len(partial["ids"])
        assert partial["indices"] == sorted(partial["indices"])
        assert all(0 <= i < n for i in partial["indices"])

        ws.send_json({"type": "resolve", "seq": 3, "decision": "accept_all"})
        rest = recv(ws, 1)["committed"][0]
        assert rest["remaining"] == 0
        assert len(rest["ids"]) == n - len(partial["ids"])
        assert rest["indices"] == list(range(len(rest["ids"])))

        ws.send_json({"type": "resolve", "seq": 4, "decision": "accept_all"})
        err = recv(ws, 1)["error"][0]
        assert err["seq"] == 4 and err["code"] == "bad_request"


def test_ws_set_params_and_batch_fill(workspace):
    client, _, _ = workspace
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.send_json({"type": "set_params", "seq": 1, "spacing": 10.0})
        frames = recv(ws, 1)
        suggestion = frames["suggestion"][0]
        assert suggestion["seq"] == 1
        assert suggestion["triple"] == [10.0, 0.0, 0.0]
        sparse = len(suggestion["strokes"])

        ws.send_json(
            {
                "type": "batch_fill",
                "seq": 2,
                "spacing": 5.0,
                "orientation_mode": "global",
                "seed": 99,
            }
        )
        suggestion = recv(ws, 1)["suggestion"][0]
        assert suggestion["seq"] == 2 and suggestion["set_id"] == 2
        assert suggestion["orientation_mode"] == "global"
        assert suggestion["triple"] == [5.0, 0.0, 0.0]
        assert len(suggestion["strokes"]) > sparse * 2

        ws.send_json({"type": "set_params", "seq": 3, "spacing": "wide"})
        err = recv(ws, 1)["error"][0]
        assert err["seq"] == 3 and err["code"] == "bad_request"


def test_ws_toggles_edit_and_undo_acks(workspace):
    client, _, _ = workspace
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.send_json({"type": "toggle_autocomplete", "seq": 1, "enabled": False})
        ack = recv(ws, 1)["ack"][0]
        assert ack["op"] == "toggle_autocomplete" and "document" not in ack

        frames = add_stroke_and_wait(ws, seq=2)
        assert frames["committed"][0]["ids"] == [5]
        outcome = frames["no_suggestion"][0]
        assert outcome["seq"] == 2 and outcome["superseded"] is False

        ws.send_json(
            {"type": "toggle_autocolor", "seq": 3, "enabled": True, "stroke_ids": [0]}
        )
        ack = recv(ws, 1)["ack"][0]
        strokes = ack["document"]["layers"][0]["strokes"]
        assert strokes[0]["color"] == [200, 200, 200, 255]  # sampled from the image
        assert strokes[1]["color"] == [0, 0, 0, 255]
        recolored = json.dumps(ack["document"])

        ws.send_json(
            {
                "type": "post_edit",
                "seq": 4,
                "stroke_ids": [1, 2],
                "property": "width",
                "value": 7.0,
            }
        )
        ack = recv(ws, 1)["ack"][0]
        widths = {s["id"]: s["width"] for s in ack["document"]["layers"][0]["strokes"]}
        assert widths[1] == 7.0 and widths[2] == 7.0 and widths[3] == 2.0
        edited = json.dumps(ack["document"])

        ws.send_json({"type": "undo", "seq": 5})
        ack = recv(ws, 1)["ack"][0]
        assert ack["op"] == "undo"
        assert json.dumps(ack["document"]) == recolored

        ws.send_json({"type": "redo", "seq": 6})
        ack = recv(ws, 1)["ack"][0]
        assert json.dumps(ack["document"]) == edited

        ws.send_json({"type": "post_edit", "seq": 7, "stroke_ids": [1], "property": "glow", "value": 1})
        assert recv(ws, 1)["error"][0]["code"] == "bad_request"


def test_ws_save_and_livewire(workspace, tmp_path):
    client, _, _ = workspace
    target = str(tmp_path / "saved.json")
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.send_json({"type": "save", "seq": 1, "path": target})
        ack = recv(ws, 1)["ack"][0]
        assert ack["op"] == "save" and ack["path"] == target
        assert len(load_document(target).all_strokes()) == 5

        ws.send_json(
            {"type": "livewire", "seq": 2, "start": [2.0, 2.0], "end": [10.0, 2.0]}
        )
        frame = recv(ws, 1)["livewire_path"][0]
        assert frame["seq"] == 2
        assert frame["path"] == [[float(x), 2.0] for x in range(2, 11)]

        ws.send_json({"type": "livewire", "seq": 3, "start": [2.0]})
        assert recv(ws, 1)["error"][0]["code"] == "bad_request"


def test_ws_survives_malformed_frames(workspace):
    client, _, _ = workspace
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.send_text("{this is not json")
        err = recv(ws, 1)["error"][0]
        assert err["code"] == "bad_request" and err["seq"] == -1

        ws.send_json({"type": "zap", "seq": 9})
        assert recv(ws, 1)["error"][0]["seq"] == 9

        ws.send_json({"type": "stroke_added", "seq": 10})
        assert recv(ws, 1)["error"][0]["seq"] == 10

        ws.send_json({"type": "undo", "seq": "later"})
        assert recv(ws, 1)["error"][0]["seq"] == -1

        # the session is still functional after every rejected frame
        ws.send_json({"type": "toggle_autocomplete", "seq": 11, "enabled": True})
        assert recv(ws, 1)["ack"][0]["seq"] == 11


def test_ws_without_document_reports_error():
    with TestClient(create_app(doc_path=None)) as client:
        with client.websocket_connect("/ws") as ws:
            err = ws.receive_json()
            assert err["type"] == "error" and err["code"] == "no_document"


def test_ws_with_missing_document_reports_load_failure(tmp_path):
    with TestClient(create_app(doc_path=str(tmp_path / "gone.json"))) as client:
        with client.websocket_connect("/ws") as ws:
            err = ws.receive_json()
            assert err["type"] == "error" and err["code"] == "load_failed"
