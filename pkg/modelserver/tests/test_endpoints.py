import pytest
from starlette.testclient import TestClient

from modelserver import BackendLoadError, ModelConfig, create_app, load_backends


class TestHealth:
    def test_reports_backend_versions(self, client):
        body = client.get("/healthz").json()
        assert body["status"] == "ok"
        assert set(body["backends"]) == {
            "captioner", "annotator", "question_generator", "question_answerer"
        }
        assert all(body["backends"].values())


class TestSingletonEndpoints:
    def test_caption(self, client):
        response = client.post("/caption", json={"image_ref": "img-red-lynx-01.jpg"})
        assert response.status_code == 200
        assert response.json() == {"caption": "a photo of red lynx"}

    def test_annotate_schema(self, client):
        text = "The lynx can jump nine feet across the open tundra."
        body = client.post("/annotate", json={"text": text}).json()
        assert set(body) == {"phrases"}
        for phrase in body["phrases"]:
            assert set(phrase) == {"text", "offset", "tags"}
            assert text[phrase["offset"] : phrase["offset"] + len(phrase["text"])] == phrase["text"]
            assert all(isinstance(tag, str) for tag in phrase["tags"])

    def test_annotate_excludes_determiner_phrases(self, client):
        body = client.post("/annotate", json={"text": "the cat sat"}).json()
        texts = [p["text"] for p in body["phrases"]]
        assert "the cat" not in texts
        assert "cat" in texts

    def test_qg_and_qa(self, client):
        question = client.post(
            "/qg", json={"passage_hl": "An adult lynx weighs <hl> forty kilograms <hl> now."}
        ).json()["question"]
        assert question == "how much is forty kilograms?"
        answer = client.post(
            "/qa",
            json={"question": question, "passage": "An adult lynx weighs forty kilograms now."},
        ).json()["answer"]
        assert answer == "forty kilograms"

    def test_identical_requests_identical_responses(self, client):
        payload = {"text": "Traders from Nairobi sell golden honey."}
        first = client.post("/annotate", json=payload).json()
        second = client.post("/annotate", json=payload).json()
        assert first == second


class TestBatchEndpoints:
    def test_caption_batch_matches_singletons(self, client):
        refs = ["img-lynx-01", "img-heron-02.png", "photos/red-panda.jpg"]
        batch = client.post("/caption_batch", json={"image_refs": refs}).json()["captions"]
        singles = [client.post("/caption", json={"image_ref": r}).json()["caption"] for r in refs]
        assert batch == singles

    def test_annotate_batch_matches_singletons(self, client):
        texts = ["the cat sat", "A warm stove and an open window."]
        batch = client.post("/annotate_batch", json={"texts": texts}).json()["results"]
        singles = [client.post("/annotate", json={"text": t}).json() for t in texts]
        assert batch == singles

    def test_qg_batch_matches_singletons(self, client):
        passages = [
            "jumps <hl> nine feet <hl> far",
            "the <hl> frozen river <hl> bends",
        ]
        batch = client.post("/qg_batch", json={"passages_hl": passages}).json()["questions"]
        singles = [client.post("/qg", json={"passage_hl": p}).json()["question"] for p in passages]
        assert batch == singles

    def test_qa_batch_matches_singletons(self, client):
        items = [
            {"question": "what is cat?", "passage": "the cat sat"},
            {"question": "what is nothing?", "passage": "the cat sat"},
        ]
        batch = client.post("/qa_batch", json={"items": items}).json()["answers"]
        singles = [client.post("/qa", json=i).json()["answer"] for i in items]
        assert batch == singles

    def test_failing_item_fails_whole_batch(self, client):
        response = client.post(
            "/caption_batch", json={"image_refs": ["img-lynx-01", "img-0001.png"]}
        )
        assert response.status_code == 500
        assert "describable" in response.json()["detail"]

    def test_empty_batches_are_fine(self, client):
        assert client.post("/caption_batch", json={"image_refs": []}).json() == {"captions": []}


class TestErrorMapping:
    def test_malformed_json_is_400(self, client):
        response = client.post(
            "/annotate", content=b"{not json", headers={"content-type": "application/json"}
        )
        assert response.status_code == 400

    def test_missing_field_is_400(self, client):
        assert client.post("/annotate", json={"txt": "x"}).status_code == 400

    def test_wrong_type_is_400(self, client):
        assert client.post("/annotate", json={"text": 17}).status_code == 400

    def test_backend_failure_is_500_with_reason(self, client):
        response = client.post("/caption", json={"image_ref": "img-01.png"})
        assert response.status_code == 500
        assert "img-01.png" in response.json()["detail"]

    def test_unhighlighted_qg_input_is_500(self, client):
        response = client.post("/qg", json={"passage_hl": "no markers here"})
        assert response.status_code == 500
        assert "highlight" in response.json()["detail"]


class TestConfiguration:
    def test_unknown_backend_id_fails_at_startup(self):
        with pytest.raises(BackendLoadError, match="no captioner backend"):
            create_app(ModelConfig(captioner="vit-gpt2"))

    def test_config_file_round_trip(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text('{"captioner": "heuristic"}', encoding="utf-8")
        assert ModelConfig.from_file(path) == ModelConfig()

    def test_config_file_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text('{"annotater": "heuristic"}', encoding="utf-8")
        with pytest.raises(BackendLoadError, match="annotater"):
            ModelConfig.from_file(path)

    def test_registered_backend_is_served(self):
        from modelserver import register_backend

        class Shouty:
            version = "shout-1"

            def __call__(self, image_ref):
                return image_ref.upper()

        register_backend("captioner", "shout", Shouty)
        app = create_app(ModelConfig(captioner="shout"))
        with TestClient(app) as client:
            assert client.post("/caption", json={"image_ref": "abc"}).json() == {"caption": "ABC"}
            assert client.get("/healthz").json()["backends"]["captioner"] == "shout-1"

    def test_backends_resolve_without_app(self):
        versions = load_backends(ModelConfig()).versions()
        assert versions["annotator"] == "rulechunk-1"
