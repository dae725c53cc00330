import csv
import io
import math

import pytest
from conftest import make_setup, seed
from hypothesis import given
from hypothesis import strategies as st

from latticetag import cost
from latticetag.cost import Convention, Dims
from latticetag.credentials import HEADLINE, SMALL, Role, generate_credential, register
from latticetag.errors import CounterMismatch, ParameterError
from latticetag.session import READER_SERVER, TAG_READER, run_honest_session
from latticetag.zq import Rng

MB, KB = 2**23, 2**13


class TestStorage:
    def test_headline_real_log(self):
        st_ = cost.storage_cost(HEADLINE, Convention.REAL_LOG)
        for ent, published in (("tag", 0.129), ("reader", 0.132), ("server", 0.515)):
            assert st_[ent] / MB == pytest.approx(published, rel=0.01)

    def test_headline_ceil_log(self):
        assert cost.storage_cost(HEADLINE, Convention.CEIL_LOG)["tag"] == 2048 * 9 + 2048 * 11 + 64 * 2048 * 9 == 1_220_608

    def test_n_zero(self):
        st_ = cost.storage_cost(Dims(m=8, n=0, q=17, l=256), Convention.REAL_LOG)
        assert st_["tag"] == pytest.approx(8 * math.log2(17) + 8 * 3)

    def test_errors(self):
        with pytest.raises(ParameterError):
            cost.storage_cost(Dims(m=0, n=0, q=17, l=256))
        with pytest.raises(ParameterError):
            cost.storage_cost(object())


class TestCommunication:
    def test_headline_real_log(self):
        cm = cost.communication_cost(HEADLINE, Convention.REAL_LOG)
        assert cm["reader-tag"] / KB == pytest.approx(6.06, rel=0.01)
        assert cm["reader-server"] / KB == pytest.approx(14.16, rel=0.01)
        lq = math.log2(257)
        assert cm["total"] == pytest.approx(10 * 2048 * lq + 3 * lq + 7 * 256)

    def test_degenerate(self):
        cm = cost.communication_cost(Dims(m=0, n=0, q=17, l=0), Convention.CEIL_LOG)
        assert cm["total"] == 3 * 5

    def test_headline_ceil_log(self):
        cm = cost.communication_cost(HEADLINE, Convention.CEIL_LOG)
        assert cm["reader-tag"] == 3 * 2048 * 9 + 2 * 256 + 9
        assert cm["reader-server"] == 7 * 2048 * 9 + 5 * 256 + 2 * 9 == 130_322
        assert cm["total"] == 186_139

    @pytest.mark.parametrize("params", [SMALL, HEADLINE], ids=str)
    def test_matches_transcript(self, params, request):
        registry, cred_t, cred_r = make_setup(params)
        outcome, transcript = run_honest_session(registry, cred_t, cred_r, Rng(1))
        assert outcome.success
        cm = cost.communication_cost(params, Convention.CEIL_LOG)
        assert transcript.payload_bits(TAG_READER) == cm["reader-tag"]
        assert transcript.payload_bits(READER_SERVER) == cm["reader-server"]
        rows = [e.payload_bits for e in transcript]
        assert rows == [cm[r] for r in ("reader->tag(1)", "tag->reader", "reader->server(1)", "server->reader(1)",
                                         "reader->server(2)", "server->reader(2)", "reader->tag(2)")]


class TestComputation:
    def test_headline(self):
        c = cost.computation_cost(HEADLINE)
        assert (c["tag"], c["reader"], c["server"], c["total"]) == (288_832, 36_866, 571_648, 897_346)

    def test_unit(self):
        assert cost.computation_cost(Dims(1, 1, 17, 256))["total"] == 67

    @given(st.integers(1, 5000), st.integers(0, 500), st.sampled_from([17, 257, 65521]))
    def test_total_identity(self, m, n, q):
        c = cost.computation_cost(Dims(m, n, q, 256))
        assert c["tag"] + c["reader"] + c["server"] == c["total"] == 54 * m + 5 * n + 6 * m * n + 2
        assert c == cost.computation_cost(Dims(m, n, 17, 256))

    def test_per_value_rows_sum(self):
        per = cost.formula_value_costs(HEADLINE)
        closed = cost.computation_cost(HEADLINE)
        for ent in ("tag", "reader", "server"):
            assert sum(per[ent].values()) == closed[ent]


class TestInstrumented:
    def test_tag_exact(self, small):
        registry, cred_t, cred_r = small
        rep = cost.instrumented_session_cost(registry, cred_t, cred_r, Rng(2))
        assert rep.success
        assert rep.measured["tag"] == rep.expected["tag"]
        assert rep.per_value["tag"] == rep.formula_per_value["tag"]

    def test_known_residues(self, small):
        # two values cost more than their closed forms: the reader's c8 needs
        # A_r u_r (2mn), and the server's c2 check hashes m + n elements
        registry, cred_t, cred_r = small
        m, n = SMALL.m, SMALL.n
        rep = cost.instrumented_session_cost(registry, cred_t, cred_r, Rng(3))
        assert rep.residues == {("reader", "c8"): 2 * m * n, ("server", "c2"): n - m}
        assert rep.measured["reader"] == 18 * m + 2 + 2 * m * n
        assert rep.measured["server"] == 23 * m + 4 * n + 4 * m * n - m + n
        assert not rep.matches

    def test_strict_raises(self, small):
        registry, cred_t, cred_r = small
        with pytest.raises(CounterMismatch) as ei:
            cost.instrumented_session_cost(registry, cred_t, cred_r, Rng(4), strict=True)
        assert ei.value.residues

    def test_deterministic(self, small):
        registry, cred_t, cred_r = small
        a = cost.instrumented_session_cost(registry, cred_t, cred_r, Rng(5))
        b = cost.instrumented_session_cost(registry, cred_t, cred_r, Rng(5))
        assert a.per_value == b.per_value

    def test_scan_overhead(self):
        registry, _, cred_r = make_setup(SMALL, "scan")
        second = generate_credential(SMALL, Role.TAG, Rng(seed("second")))
        register(registry, second)
        rep = cost.instrumented_session_cost(registry, second, cred_r, Rng(6))
        assert rep.success
        assert rep.records_tried == {"reader": 1, "tag": 2}
        assert rep.scan_overhead > 0
        single = make_setup(SMALL, "scan")
        base = cost.instrumented_session_cost(*single, Rng(6))
        assert rep.measured["server"] == base.measured["server"]


class TestCsv:
    def test_sweep_monotone(self):
        rows = cost.sweep([256, 512, 1024, 2048, 4096])
        assert len(rows) == 5
        numeric = [c for c in cost.CSV_COLUMNS if c.endswith(("_bits", "_mb", "_kb", "_ops"))]
        for col in numeric:
            vals = [r[col] for r in rows]
            if col in ("comm_reader->tag(1)_bits", "comm_reader->server(2)_bits",
                       "comm_server->reader(2)_bits", "comm_reader->tag(2)_bits"):
                assert len(set(vals)) == 1, col
            else:
                assert vals == sorted(vals) and len(set(vals)) == 5, col

    def test_csv_text(self):
        text = cost.rows_to_csv(cost.sweep([2048], conventions=(Convention.REAL_LOG, Convention.CEIL_LOG)))
        rows = list(csv.DictReader(io.StringIO(text)))
        assert list(rows[0].keys()) == cost.CSV_COLUMNS
        real_row, wire_row = rows
        assert float(real_row["storage_tag_mb"]) == pytest.approx(0.129, rel=0.01)
        assert "published" in real_row["note"] and wire_row["note"] == ""
        assert int(wire_row["comm_total_bits"]) == 186_139
