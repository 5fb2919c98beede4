from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from conftest import SYNTH_TRAIN, write_csv
from fewintent import curation as cu
from fewintent.corpus import (
    CuratedProvenance,
    Split,
    load_csv,
    per_class_order,
    sample_few_shot,
)
from fewintent.curation_api import create_app
from fewintent.errors import DomainError


class TestStartSession:
    def test_candidate_shortlists(self, synth_train):
        session = cu.start_session(synth_train, 10, 3, seed=0)
        assert len(session.classes) == 5
        for state in session.classes.values():
            assert len(state.candidates) == 10
            assert not state.short_class
            assert not state.done
            rows = [row for row, _ in state.candidates]
            assert rows == sorted(rows)
            for row, text in state.candidates:
                assert synth_train.utterances[row].text == text
                assert synth_train.utterances[row].label_id == state.label_id

    def test_shortlist_matches_seeded_order(self, synth_train):
        session = cu.start_session(synth_train, 10, 3, seed=7)
        by_label = synth_train.rows_by_label()
        for state in session.classes.values():
            expected = sorted(
                per_class_order(7, state.label_name, by_label[state.label_id])[:10]
            )
            assert [row for row, _ in state.candidates] == expected

    def test_same_seed_same_candidates(self, synth_train):
        a = cu.start_session(synth_train, 10, 3, seed=1)
        b = cu.start_session(synth_train, 10, 3, seed=1)
        assert a.session_id != b.session_id  # identity differs
        for label_id in a.classes:
            assert a.classes[label_id].candidates == b.classes[label_id].candidates

    def test_short_class_flagged(self, tmp_path):
        rows = [("small class text %d?" % i, "tiny_class") for i in range(4)]
        rows += [("big class text %d?" % i, "big_class") for i in range(12)]
        dataset = load_csv(write_csv(tmp_path / "d.csv", rows), Split.TRAIN)
        session = cu.start_session(dataset, candidates_per_class=10, picks_per_class=3)
        by_name = {s.label_name: s for s in session.classes.values()}
        assert by_name["tiny_class"].short_class
        assert len(by_name["tiny_class"].candidates) == 4
        assert not by_name["big_class"].short_class

    def test_class_smaller_than_picks_fails(self, tmp_path):
        rows = [("only two here one?", "a"), ("only two here two?", "a")]
        rows += [("plenty %d?" % i, "b") for i in range(10)]
        dataset = load_csv(write_csv(tmp_path / "d.csv", rows), Split.TRAIN)
        with pytest.raises(DomainError, match="cannot ever pick"):
            cu.start_session(dataset, candidates_per_class=10, picks_per_class=3)

    def test_parameter_validation(self, synth_train):
        with pytest.raises(DomainError, match="picks"):
            cu.start_session(synth_train, 10, 0)
        with pytest.raises(DomainError, match="must be >="):
            cu.start_session(synth_train, 2, 3)


class TestSelections:
    def session(self, synth_train):
        return cu.start_session(synth_train, 10, 3, seed=0)

    def test_record_and_progress(self, synth_train):
        session = self.session(synth_train)
        assert session.progress() == (0, 5)
        state = session.classes[0]
        picks = [row for row, _ in state.candidates[:3]]
        cu.record_selection(session, 0, picks)
        assert state.done
        assert session.progress() == (1, 5)
        assert session.pending_classes() == [
            session.classes[i].label_name for i in range(1, 5)
        ]

    def test_resubmission_overwrites(self, synth_train):
        session = self.session(synth_train)
        state = session.classes[0]
        rows = [row for row, _ in state.candidates]
        cu.record_selection(session, 0, rows[:3])
        cu.record_selection(session, 0, rows[3:6])
        assert state.selections == rows[3:6]

    def test_exact_cardinality_enforced(self, synth_train):
        session = self.session(synth_train)
        rows = [row for row, _ in session.classes[0].candidates]
        with pytest.raises(DomainError, match="exactly 3"):
            cu.record_selection(session, 0, rows[:2])
        with pytest.raises(DomainError, match="exactly 3"):
            cu.record_selection(session, 0, rows[:4])
        with pytest.raises(DomainError, match="distinct"):
            cu.record_selection(session, 0, [rows[0], rows[0], rows[1]])

    def test_foreign_rows_rejected(self, synth_train):
        session = self.session(synth_train)
        rows = [row for row, _ in session.classes[0].candidates]
        with pytest.raises(DomainError, match="not candidates"):
            cu.record_selection(session, 0, rows[:2] + [99999])
        with pytest.raises(DomainError, match="unknown class"):
            cu.record_selection(session, 42, rows[:3])

    def test_export_requires_completion(self, synth_train):
        session = self.session(synth_train)
        with pytest.raises(DomainError, match="pending") as exc_info:
            cu.export_manifest(session)
        assert session.classes[0].label_name in str(exc_info.value)

    def test_manifest_round_trip_into_sampler(self, synth_train, tmp_path):
        session = self.session(synth_train)
        chosen: dict[int, list[int]] = {}
        for label_id, state in session.classes.items():
            rows = [row for row, _ in state.candidates]
            chosen[label_id] = rows[1:4]
            cu.record_selection(session, label_id, rows[1:4])
        manifest = cu.export_manifest(session)
        assert manifest["picks_per_class"] == 3
        assert manifest["fingerprint"] == synth_train.fingerprint

        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(manifest), encoding="utf-8")
        sample = sample_few_shot(synth_train, 3, CuratedProvenance(str(path)))
        for label_id, rows in chosen.items():
            assert list(sample.rows[label_id]) == rows
            assert [u.text for u in sample.instances[label_id]] == [
                synth_train.utterances[r].text for r in rows
            ]


class TestSessionStore:
    def complete_session(self, synth_train):
        session = cu.start_session(synth_train, 10, 3, seed=0)
        for label_id, state in session.classes.items():
            cu.record_selection(
                session, label_id, [row for row, _ in state.candidates[:3]]
            )
        return session

    def test_save_load_round_trip(self, synth_train, tmp_path):
        store = cu.SessionStore(tmp_path)
        session = self.complete_session(synth_train)
        store.save(session)
        loaded = store.load(session.session_id)
        assert loaded.to_json_dict() == session.to_json_dict()
        assert store.session_ids() == [session.session_id]
        assert store.exists(session.session_id)

    def test_load_unknown(self, tmp_path):
        store = cu.SessionStore(tmp_path)
        with pytest.raises(DomainError, match="no such session"):
            store.load("abc123")
        with pytest.raises(DomainError, match="malformed"):
            store.load("../escape")

    def test_audit_log_appends(self, synth_train, tmp_path):
        store = cu.SessionStore(tmp_path)
        session = self.complete_session(synth_train)
        store.save(session)
        store.append_audit(session.session_id, {"event": "one"})
        store.append_audit(session.session_id, {"event": "two", "detail": 5})
        entries = store.audit_entries(session.session_id)
        assert [e["event"] for e in entries] == ["one", "two"]
        assert all("at" in e for e in entries)

    def test_write_manifest(self, synth_train, tmp_path):
        store = cu.SessionStore(tmp_path)
        session = self.complete_session(synth_train)
        store.save(session)
        path = store.write_manifest(session)
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data == cu.export_manifest(session)


class TestHttpApi:
    @pytest.fixture()
    def client(self, tmp_path):
        self.store_root = tmp_path / "state"
        store = cu.SessionStore(self.store_root)
        return TestClient(create_app(store))

    def create(self, client, **overrides) -> str:
        body = {
            "dataset_path": str(SYNTH_TRAIN),
            "candidates_per_class": 10,
            "picks_per_class": 3,
            "seed": 0,
        }
        body.update(overrides)
        resp = client.post("/sessions", json=body)
        assert resp.status_code == 200, resp.text
        return resp.json()["session_id"]

    def test_create_and_get(self, client):
        session_id = self.create(client)
        resp = client.get(f"/sessions/{session_id}")
        assert resp.status_code == 200
        data = resp.json()
        assert data["picks_per_class"] == 3
        assert len(data["classes"]) == 5
        assert all(c["status"] == "pending" for c in data["classes"].values())

    def test_create_bad_dataset(self, client):
        resp = client.post("/sessions", json={"dataset_path": "/nope/missing.csv"})
        assert resp.status_code == 400

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/feedbeef0000").status_code == 404

    def test_candidates_endpoint(self, client, synth_train):
        session_id = self.create(client)
        resp = client.get(f"/sessions/{session_id}/classes/0/candidates")
        assert resp.status_code == 200
        rows = resp.json()
        assert len(rows) == 10
        for entry in rows:
            assert synth_train.utterances[entry["row_index"]].text == entry["text"]
        assert client.get(
            f"/sessions/{session_id}/classes/99/candidates"
        ).status_code == 404

    def test_selection_flow_and_manifest(self, client, synth_train):
        session_id = self.create(client)
        assert (
            client.get(f"/sessions/{session_id}/manifest").status_code == 409
        )  # nothing selected yet
        for label_id in range(5):
            cands = client.get(
                f"/sessions/{session_id}/classes/{label_id}/candidates"
            ).json()
            picks = [c["row_index"] for c in cands[:3]]
            resp = client.put(
                f"/sessions/{session_id}/classes/{label_id}/selection",
                json={"indices": picks},
            )
            assert resp.status_code == 200
            assert resp.json()["status"] == "done"
        resp = client.get(f"/sessions/{session_id}/manifest")
        assert resp.status_code == 200
        manifest = resp.json()
        assert manifest["picks_per_class"] == 3
        assert set(manifest["selections"]) == set(synth_train.label_space.names)
        assert (self.store_root / session_id / "manifest.json").is_file()

    def test_selection_validation_maps_to_400(self, client):
        session_id = self.create(client)
        cands = client.get(f"/sessions/{session_id}/classes/0/candidates").json()
        rows = [c["row_index"] for c in cands]
        resp = client.put(
            f"/sessions/{session_id}/classes/0/selection", json={"indices": rows[:2]}
        )
        assert resp.status_code == 400
        assert "exactly 3" in resp.json()["detail"]
        resp = client.put(
            f"/sessions/{session_id}/classes/0/selection",
            json={"indices": rows[:2] + [123456]},
        )
        assert resp.status_code == 400

    def test_state_survives_process_restart(self, client):
        session_id = self.create(client)
        cands = client.get(f"/sessions/{session_id}/classes/0/candidates").json()
        picks = [c["row_index"] for c in cands[:3]]
        client.put(
            f"/sessions/{session_id}/classes/0/selection", json={"indices": picks}
        )
        # A new store + app over the same directory sees the committed state.
        reborn = TestClient(create_app(cu.SessionStore(self.store_root)))
        data = reborn.get(f"/sessions/{session_id}").json()
        assert data["classes"]["0"]["selections"] == picks
        audit = cu.SessionStore(self.store_root).audit_entries(session_id)
        assert [e["event"] for e in audit] == [
            "session_created",
            "selection_recorded",
        ]
