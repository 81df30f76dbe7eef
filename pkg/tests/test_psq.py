import numpy as np
import pytest

from xlir.errors import FormatError, ValidationError
from xlir.psq import TranslationTable, load_table, prune_table, translate_doc


def write_tsv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(str(v) for v in row) + "\n")


class TestLoadTable:
    def test_grouping(self, tmp_path):
        path = tmp_path / "t.tsv"
        write_tsv(path, [("a", "x", 0.6), ("a", "y", 0.4)])
        table = load_table(path)
        assert table["a"] == [("x", 0.6), ("y", 0.4)]

    def test_mass_violation(self, tmp_path):
        path = tmp_path / "t.tsv"
        write_tsv(path, [("a", "x", 0.8), ("a", "y", 0.4)])
        with pytest.raises(ValidationError, match="1.2"):
            load_table(path)

    def test_singleton(self, tmp_path):
        path = tmp_path / "t.tsv"
        write_tsv(path, [("b", "x", 1.0)])
        assert load_table(path)["b"] == [("x", 1.0)]

    @pytest.mark.parametrize("bad", ["0.0", "-0.1", "1.5", "abc"])
    def test_probability_range(self, tmp_path, bad):
        path = tmp_path / "t.tsv"
        path.write_text(f"a\tx\t{bad}\n")
        with pytest.raises(FormatError, match=":1"):
            load_table(path)

    def test_wrong_arity(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("a\tx\n")
        with pytest.raises(FormatError, match="3 tab-separated"):
            load_table(path)

    def test_sorted_descending(self, tmp_path):
        path = tmp_path / "t.tsv"
        write_tsv(path, [("a", "y", 0.2), ("a", "x", 0.5), ("a", "z", 0.3)])
        assert load_table(path)["a"] == [("x", 0.5), ("z", 0.3), ("y", 0.2)]


class TestPruneTable:
    def test_max_alts_renormalizes(self):
        table = TranslationTable.from_rows([("a", "x", 0.5), ("a", "y", 0.3), ("a", "z", 0.2)])
        pruned = prune_table(table, cum_mass=1.0, max_alts=2)
        # Keep the top two entries and renormalize by 0.8.
        ((tx, px), (ty, py)) = pruned["a"]
        assert (tx, ty) == ("x", "y")
        assert px == pytest.approx(0.625, abs=1e-12)
        assert py == pytest.approx(0.375, abs=1e-12)

    def test_singleton_unchanged(self):
        table = TranslationTable.from_rows([("a", "x", 0.7)])
        assert prune_table(table)["a"] == [("x", 1.0)]

    def test_cum_mass_stops_at_first(self):
        table = TranslationTable.from_rows([("a", "x", 0.5), ("a", "y", 0.3), ("a", "z", 0.2)])
        assert prune_table(table, cum_mass=0.5, max_alts=10)["a"] == [("x", 1.0)]

    def test_invalid_params(self):
        table = TranslationTable.from_rows([("a", "x", 1.0)])
        with pytest.raises(ValidationError):
            prune_table(table, cum_mass=0.0)
        with pytest.raises(ValidationError):
            prune_table(table, max_alts=0)

    def test_renormalized_mass_sums_to_one(self):
        rng = np.random.default_rng(7)
        rows = []
        for s in range(20):
            probs = rng.dirichlet(np.ones(6)) * rng.uniform(0.5, 1.0)
            rows.extend((f"s{s}", f"t{j}", float(p)) for j, p in enumerate(probs))
        pruned = prune_table(TranslationTable.from_rows(rows), cum_mass=0.8, max_alts=3)
        for targets in pruned.entries.values():
            assert sum(p for _, p in targets) == pytest.approx(1.0, abs=1e-9)
            probs = [p for _, p in targets]
            assert probs == sorted(probs, reverse=True)


def matrix_oracle(counts, table):
    """Count-vector times probability-matrix product."""
    sources = sorted(set(counts) | set(table.entries))
    targets = sorted({t for row in table.entries.values() for t, _ in row})
    vec = np.array([counts.get(s, 0.0) for s in sources], dtype=np.float64)
    mat = np.zeros((len(sources), len(targets)))
    for i, s in enumerate(sources):
        for t, p in table.entries.get(s, []):
            mat[i, targets.index(t)] += p
    out = vec @ mat
    return {t: out[j] for j, t in enumerate(targets) if out[j] > 0}


class TestTranslateDoc:
    def test_identity_table(self):
        table = TranslationTable.from_rows([("a", "a", 1.0)])
        assert translate_doc({"a": 3}, table) == {"a": 3.0}

    def test_worked_example(self):
        table = TranslationTable.from_rows([("a", "x", 0.6), ("a", "y", 0.4), ("b", "x", 1.0)])
        bag = translate_doc({"a": 2, "b": 1}, table)
        assert bag == pytest.approx({"x": 2.2, "y": 0.8})

    def test_out_of_vocabulary(self):
        table = TranslationTable.from_rows([("a", "x", 1.0)])
        assert translate_doc({"q": 5}, table) == {}

    def random_table_and_counts(self, rng, n_sources=50, n_targets=50):
        rows = []
        for s in range(n_sources):
            k = int(rng.integers(1, 6))
            probs = rng.dirichlet(np.ones(k))
            picks = rng.choice(n_targets, size=k, replace=False)
            rows.extend((f"s{s}", f"t{j}", float(p)) for j, p in zip(picks, probs))
        table = TranslationTable.from_rows(rows)
        counts = {f"s{int(s)}": float(rng.integers(1, 10)) for s in rng.choice(n_sources, 30, replace=False)}
        return table, counts

    def test_matches_matrix_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            table, counts = self.random_table_and_counts(rng)
            bag = translate_doc(counts, table)
            oracle = matrix_oracle(counts, table)
            assert set(bag) == set(oracle)
            for term in bag:
                assert bag[term] == pytest.approx(oracle[term], abs=1e-9)

    def test_mass_conservation(self):
        rng = np.random.default_rng(13)
        table, counts = self.random_table_and_counts(rng)
        bag = translate_doc(counts, table)
        expected = sum(
            count * sum(p for _, p in table[source])
            for source, count in counts.items()
            if source in table
        )
        assert sum(bag.values()) == pytest.approx(expected, abs=1e-9)

    def test_linearity(self):
        rng = np.random.default_rng(17)
        table, counts1 = self.random_table_and_counts(rng)
        _, counts2 = self.random_table_and_counts(rng)
        merged = dict(counts1)
        for source, count in counts2.items():
            merged[source] = merged.get(source, 0.0) + count
        left = translate_doc(merged, table)
        b1, b2 = translate_doc(counts1, table), translate_doc(counts2, table)
        right = dict(b1)
        for term, w in b2.items():
            right[term] = right.get(term, 0.0) + w
        assert set(left) == set(right)
        for term in left:
            assert left[term] == pytest.approx(right[term], abs=1e-9)

    def test_duplicate_rows_rejected(self):
        with pytest.raises(ValidationError):
            TranslationTable.from_rows([("a", "x", 0.3), ("a", "x", 0.3)])
