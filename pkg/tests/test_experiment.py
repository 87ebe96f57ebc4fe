import json

import numpy as np
import pytest

from drcgd import cli
from drcgd.errors import ParseError, SchemaMismatch, UnknownColumn, ValidationError
from drcgd.experiment import (
    CSV_COLUMNS,
    ExperimentConfig,
    ExperimentError,
    compare,
    execute,
    first_below,
    parse_config,
    read_records,
    serialize_config,
    with_overrides,
    write_records,
)
from drcgd.network import Graph
from drcgd.seeding import derive_seed
from drcgd.solvers import IterationRecord, SolverConfig


def small_config(tmp_path, name="out.csv", **changes):
    base = ExperimentConfig(n=4, d=5, r=2, m_per_agent=20, sigma0=None, output_path=str(tmp_path / name),
                            solver=SolverConfig(max_epochs=10, tol_ds=0.0))
    return with_overrides(base, **changes)


def numeric_columns(path):
    header, rows = read_records(path)
    return [tuple(row[c] for c in header if c != "wall_seconds") for row in rows]


class TestSeeding:
    def test_stable(self):
        assert derive_seed(0, "graph") == derive_seed(0, "graph")
        assert len({derive_seed(0, "graph"), derive_seed(0, "data"), derive_seed(1, "graph"),
                    derive_seed(0, "init", 0), derive_seed(0, "init", 1)}) == 5
        assert 0 <= derive_seed(123, "x") < 2**64


class TestParseConfig:
    def test_empty(self):
        c = parse_config("")
        assert c == ExperimentConfig()
        assert c.solver.variant == "drcgd"
        assert (c.graph_kind, c.n, c.d, c.r, c.m_per_agent, c.eigengap) == ("ring", 16, 10, 5, 1000, 0.8)

    def test_values_and_comments(self):
        c = parse_config("# comment\nvariant = dprgd\nt=10  # trailing\nsigma0=auto\ngraph_kind=er\ner_p=0.3\n"
                         "normalize_255=yes\n")
        assert c.solver.variant == "dprgd" and c.solver.t == 10
        assert c.sigma0 is None and c.er_p == 0.3 and c.normalize_255

    def test_er_without_p(self):
        with pytest.raises(ValidationError, match="er_p"):
            parse_config("graph_kind=er\n")

    def test_p_without_er(self):
        with pytest.raises(ValidationError, match="er_p"):
            parse_config("er_p=0.5\n")

    def test_collects_all_problems(self):
        with pytest.raises(ValidationError) as info:
            parse_config("variant=foo\ngraph_kind=er\ninit=nope\n")
        joined = " ".join(info.value.problems)
        assert "variant" in joined and "er_p" in joined and "init" in joined

    @pytest.mark.parametrize("text,line", [
        ("n=4\nbogus\n", 2),
        ("n=4\nwhat=1\n", 2),
        ("n=4\nn=5\n", 2),
        ("t=1.5\n", 1),
        ("normalize_255=maybe\n", 1),
    ])
    def test_parse_errors(self, text, line):
        with pytest.raises(ParseError, match=f"line {line}"):
            parse_config(text)

    @pytest.mark.parametrize("config", [
        ExperimentConfig(),
        ExperimentConfig(graph_kind="er", er_p=0.6, sigma0=None, seed=2**63, init="independent",
                         solver=SolverConfig(variant="drdgd", t=10, alpha_hat=0.1 + 0.2, beta_cap=0.0)),
        ExperimentConfig(data_path="/data/x.csv", normalize_255=True),
    ])
    def test_round_trip(self, config):
        text = serialize_config(config)
        assert parse_config(text) == config
        assert serialize_config(parse_config(text)) == text


class TestExecute:
    def test_single_row(self, tmp_path):
        path = execute(small_config(tmp_path, max_epochs=0))
        header, rows = read_records(path)
        assert tuple(header) == CSV_COLUMNS
        assert len(rows) == 1

    def test_artifacts(self, tmp_path):
        path = execute(small_config(tmp_path))
        meta = json.loads(path.with_name(path.name + ".meta.json").read_text())
        assert meta["epochs_recorded"] == 11
        assert meta["t_configured"] == 1
        assert set(meta["t_thresholds"]) == {"stay_in_neighborhood", "consensus_contraction",
                                             "bounded_directions", "consensus_vs_step"}
        assert meta["L_g"] == pytest.approx(meta["L"] + 2 * meta["L_f"])
        g = Graph.load(path.with_name(path.name + ".edges"), n=4)
        assert len(g.edges) == 4

    def test_deterministic(self, tmp_path):
        a = execute(small_config(tmp_path, "a.csv"))
        b = execute(small_config(tmp_path, "b.csv"), workers=3)
        assert numeric_columns(a) == numeric_columns(b)

    def test_seed_changes_result(self, tmp_path):
        a = execute(small_config(tmp_path, "a.csv", seed=1))
        b = execute(small_config(tmp_path, "b.csv", seed=2))
        assert numeric_columns(a) != numeric_columns(b)

    @pytest.mark.parametrize("kind,p", [("er", 0.5), ("complete", None)])
    def test_graph_kinds(self, tmp_path, kind, p):
        path = execute(small_config(tmp_path, graph_kind=kind, er_p=p))
        assert len(read_records(path)[1]) == 11

    def test_data_path(self, tmp_path):
        rng = np.random.default_rng(0)
        data = tmp_path / "data.csv"
        np.savetxt(data, rng.standard_normal((40, 5)), delimiter=",")
        path = execute(small_config(tmp_path, data_path=str(data)))
        _, rows = read_records(path)
        assert rows[0]["ds"] != "absent"

    def test_missing_data_file(self, tmp_path):
        with pytest.raises(ExperimentError, match="problem"):
            execute(small_config(tmp_path, data_path=str(tmp_path / "missing.csv")))

    def test_absent_sentinel(self, tmp_path):
        nan = float("nan")
        rec = IterationRecord(0, 0.1, 0.0, 0.0, 1.0, nan, nan, 0.0)
        path = tmp_path / "r.csv"
        write_records(path, [rec])
        _, rows = read_records(path)
        assert rows[0]["ds"] == "absent" and rows[0]["objective_gap"] == "absent"
        assert float(rows[0]["alpha"]) == 0.1


class TestCompare:
    def _write(self, path, values, header=CSV_COLUMNS):
        lines = [",".join(header)]
        for k, v in enumerate(values):
            lines.append(",".join([str(k), "0.1", "0", "0", "0", "0", v, "0"]))
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_starts_below(self, tmp_path):
        p = self._write(tmp_path / "a.csv", ["1e-4", "1e-5"])
        assert compare([p], "ds", 1e-3) == [(str(p), 0)]

    def test_never(self, tmp_path):
        p = self._write(tmp_path / "a.csv", ["1", "0.5"])
        assert first_below(p, "ds", 1e-3) is None

    def test_absent_ignored(self, tmp_path):
        p = self._write(tmp_path / "a.csv", ["absent", "absent"])
        assert first_below(p, "ds", 1e-3) is None

    def test_schema_mismatch(self, tmp_path):
        p = self._write(tmp_path / "a.csv", ["1"], header=("k",) + CSV_COLUMNS[2:] + ("extra",))
        with pytest.raises(SchemaMismatch):
            compare([p], "ds", 1e-3)

    def test_unknown_column(self, tmp_path):
        p = self._write(tmp_path / "a.csv", ["1"])
        with pytest.raises(UnknownColumn):
            compare([p], "loss", 1e-3)


class TestCli:
    def test_run_and_compare(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("n=4\nd=5\nr=2\nm_per_agent=20\nsigma0=auto\nmax_epochs=5\n")
        out = tmp_path / "run.csv"
        assert cli.main(["run", str(cfg), "--out", str(out), "--seed", "3", "--workers", "2"]) == 0
        assert out.exists()
        capsys.readouterr()
        assert cli.main(["compare", str(out), "--metric", "ds", "--threshold", "1e-30"]) == 0
        assert capsys.readouterr().out.strip().endswith("never")
        assert cli.main(["compare", str(out), "--metric", "ds", "--threshold", "100"]) == 0
        assert capsys.readouterr().out.strip().endswith("\t0")

    def test_invalid_config_exit(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("graph_kind=er\n")
        assert cli.main(["run", str(cfg)]) == 1
        cfg.write_text("nonsense\n")
        assert cli.main(["run", str(cfg)]) == 1
        assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 1

    def test_runtime_error_exit(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(f"data_path={tmp_path / 'missing.csv'}\noutput_path={tmp_path / 'o.csv'}\n")
        assert cli.main(["run", str(cfg)]) == 2

    def test_compare_errors(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        assert cli.main(["compare", str(bad)]) == 1
        assert cli.main(["compare", str(tmp_path / "missing.csv")]) == 2
