from dofsp.transcript import Transcript, db_name, entity_of, leader_name


def sample():
    t = Transcript(leader_name(1))
    t.send(1, "psi", "E1", db_name(2, 1), [1, 2, 3])
    t.send(1, "psi", db_name(2, 1), db_name(3, 1), [4, 5, 6])
    t.send(1, "psi", db_name(3, 1), "E1", 7)
    return t


def test_ledger_split():
    t = sample()
    assert (t.ledger.upload, t.ledger.download, t.ledger.relay, t.ledger.total) == (3, 1, 3, 7)
    assert t.ledger.as_dict()["links"]["E1->E2.db1"] == 3


def test_views_and_shapes():
    t = sample()
    assert t.view("E2.db1") == (("in", "E1", (1, 2, 3)), ("out", "E3.db1", (4, 5, 6)))
    assert t.shape("E3.db1") == (("in", "E2.db1", 3), ("out", "E1", 1))
    assert t.view("E4.db1") == ()
    assert t.parties() == {"E1", "E2.db1", "E3.db1"}


def test_digest_tracks_content():
    a, b = sample(), sample()
    assert a.digest() == b.digest()
    b.send(2, "psi", "E1", db_name(2, 2), [0])
    assert a.digest() != b.digest()


def test_names():
    assert entity_of(db_name(12, 3)) == 12 and entity_of(leader_name(4)) == 4
