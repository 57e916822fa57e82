import pytest

from mod2t.core import BoundingBox, InvalidInputError, Source
from mod2t.tradtrack import BlobTracker, TrackStatus, track_step


def moving(x0, y, vx, t, size=12):
    return BoundingBox(x0 + vx * t, y, size, size)


class TestBlobTracker:
    def test_no_blobs(self):
        tr = BlobTracker()
        assert all(tr.update([]) == [] for _ in range(5))

    def test_single_blob_keeps_identity(self):
        tr = BlobTracker(min_hits=3)
        out = [tr.update([moving(10, 20, 2, t)]) for t in range(10)]
        assert out[0] == [] and out[1] == []
        ids = {r.track_id for frame in out[2:] for r in frame}
        assert ids == {1}
        assert [r.frame for frame in out[2:] for r in frame] == list(range(3, 11))
        assert all(r.source is Source.TRADITIONAL for frame in out for r in frame)

    def test_crossing_blobs_keep_identities(self):
        tr = BlobTracker(iou_gate=0.3, min_hits=2)
        truth = {}
        for t in range(30):
            a = BoundingBox(10 + 3 * t, 40, 14, 14)
            b = BoundingBox(100 - 3 * t, 46, 14, 14)
            recs = tr.update([a, b])
            for r in recs:
                owner = "a" if r.box == a else "b"
                truth.setdefault(owner, set()).add(r.track_id)
        assert truth["a"] != truth["b"]
        assert len(truth["a"]) == 1 and len(truth["b"]) == 1

    def test_coasting_and_expiry(self):
        tr = BlobTracker(min_hits=1, max_age=2)
        tr.update([BoundingBox(0, 0, 10, 10)])
        for _ in range(2):
            assert tr.update([]) == []
        assert len(tr.tracks_) == 1 and tr.tracks_[0].status is TrackStatus.LOST
        tr.update([])
        assert tr.tracks_ == []

    def test_reacquire_after_gap(self):
        tr = BlobTracker(min_hits=1, max_age=5)
        for t in range(4):
            tr.update([moving(0, 0, 4, t, 20)])
        tr.update([])
        (r,) = tr.update([moving(0, 0, 4, 5, 20)])
        assert r.track_id == 1

    def test_one_to_one(self):
        tr = BlobTracker(min_hits=1)
        tr.update([BoundingBox(0, 0, 10, 10)])
        recs = tr.update([BoundingBox(0, 0, 10, 10), BoundingBox(1, 0, 10, 10)])
        assert len({r.track_id for r in recs}) == len(recs)

    def test_deterministic(self):
        seq = [[moving(10, 20, 2, t), moving(80, 20, -1, t)] for t in range(15)]
        assert BlobTracker().fit_predict(seq) == BlobTracker().fit_predict(seq)

    def test_track_step_and_frame_counter(self):
        tr = BlobTracker(min_hits=1)
        track_step(tr, [])
        (r,) = track_step(tr, [BoundingBox(0, 0, 5, 5)])
        assert r.frame == 2

    def test_invalid_params(self):
        with pytest.raises(InvalidInputError):
            BlobTracker(iou_gate=1.5).update([])
