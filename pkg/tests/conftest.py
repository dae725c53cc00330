import hashlib

import pytest

from latticetag.credentials import (
    HEADLINE,
    SMALL,
    Role,
    ServerRegistry,
    generate_credential,
    register,
)
from latticetag.zq import Rng


def seed(label: str) -> bytes:
    return hashlib.sha256(label.encode()).digest()


def make_setup(params, label="setup"):
    rng = Rng(seed(label))
    cred_t = generate_credential(params, Role.TAG, rng.child("tag"))
    cred_r = generate_credential(params, Role.READER, rng.child("reader"))
    registry = ServerRegistry(params)
    register(registry, cred_t)
    register(registry, cred_r)
    return registry, cred_t, cred_r


@pytest.fixture(scope="session")
def small():
    return make_setup(SMALL)


@pytest.fixture(scope="session")
def mid():
    from latticetag.credentials import Params

    return make_setup(Params(n=8, m=64, q=257))


@pytest.fixture(scope="session")
def headline():
    return make_setup(HEADLINE)


def step_through(registry, cred_t, cred_r, rng, alpha=None):
    """Call the protocol steps directly (no wire); return every intermediate."""
    from latticetag import protocol
    from latticetag.messages import Query

    query, a = protocol.reader_begin(registry.params, rng.child("reader-begin"))
    if alpha is not None:
        query, a = Query(alpha), alpha
    tc, tsess = protocol.tag_commit(cred_t, query, rng.child("tag"))
    rc, rsess = protocol.reader_commit(cred_r, a, tc, rng.child("reader"))
    ch, ssess = protocol.server_process_commit(registry, rc, rng.child("server"))
    c12 = protocol.reader_open_challenge(cred_r, rsess, ch)
    proof = protocol.reader_prove(cred_r, rsess, ch)
    sc = protocol.server_confirm(registry, ssess, proof)
    tconf = protocol.reader_finalize(rsess, sc)
    outcome = protocol.tag_finalize(tsess, tconf)
    return dict(
        query=query, tc=tc, tsess=tsess, rc=rc, rsess=rsess, ch=ch, ssess=ssess,
        c12=c12, proof=proof, sc=sc, tconf=tconf, outcome=outcome,
    )


def correctness_identities(flow, cred_t, cred_r):
    """Check the eight honest-run identities by recomputing from role-local secrets.

    Returns a dict name -> bool.
    """
    from latticetag.hashing import h1
    from latticetag.zq import mat_vec_mul, perm_apply, scalar_mul, vec_add, vec_sub

    t, r, s = flow["tsess"], flow["rsess"], flow["ssess"]
    l = cred_t.params.l
    return {
        "c9 = A_r u_r": s.c9 == mat_vec_mul(cred_r.a, r.u_r),
        "c10 = x_r": s.c10 == cred_r.x,
        "c4 = A_t u_t": s.c4 == mat_vec_mul(cred_t.a, t.u_t),
        "c5 = x_t": s.c5 == cred_t.x,
        "c11 = P_r(x_s + x2)": flow["ch"].c11 == perm_apply(cred_r.perm, vec_add(s.x_s, r.x2)),
        "c12 = x_s": flow["c12"] == s.x_s and s.x2_expected == r.x2,
        "c14 = H1(u_t - x1 alpha)": flow["sc"].c14 == h1(vec_sub(t.u_t, scalar_mul(t.alpha, t.x1)), l=l),
        "c15 = H1(u_r - x2 gamma)": flow["sc"].c15 == h1(vec_sub(r.u_r, scalar_mul(r.gamma, r.x2)), l=l),
    }


def random_message(msg_type, params, rng):
    from latticetag.messages import MESSAGE_CLASSES

    cls = MESSAGE_CLASSES[msg_type]
    values = {}
    for name, kind in cls.FIELDS:
        if kind == "scalar":
            values[name] = rng.integers(0, params.q)
        elif kind == "vector":
            values[name] = rng.zq_vector(params.m, params.q)
        else:
            d = bytearray(rng.randbytes(params.digest_bytes))
            if params.l % 8:
                d[-1] &= (0xFF << (8 - params.l % 8)) & 0xFF
            values[name] = bytes(d)
    return cls(**values)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
