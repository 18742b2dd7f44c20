import csv
import io
import os
import warnings
from collections import Counter

import numpy as np
import pytest

from oracle import FlatTree
from rmmt.cli import convert_bp, run_benchmark as bench_cli
from rmmt.core.bench import (
    CSV_HEADER,
    DELETE_DRAWS,
    BenchmarkRunner,
    BenchWorker,
    binomial_band,
    build_config,
    delete_request,
    emit_csv,
    mean_record,
    run_benchmark,
)
from rmmt.core.concurrency_engine import ConcurrencyEngine
from rmmt.core.errors import AccountingError, ConfigError, InputError
from rmmt.core.ingest import load_document, random_balanced
from rmmt.core.models import BenchRecord, ConcurrencyMode, EngineKind
from rmmt.core.rmmt_index import Rmmt

SPECULATIVE = ConcurrencyMode(kind=EngineKind.SPECULATIVE_FALLBACK, retry_limit=2)
RWLOCK = ConcurrencyMode(kind=EngineKind.GLOBAL_RWLOCK)


def record(**overrides) -> BenchRecord:
    fields = dict(
        mode=EngineKind.SPECULATIVE_FALLBACK, threads=4, duration_s=10.0, write_pct=0.5,
        retries=2, input="random:500", seed=5, repetitions=1, leaf_fill=0.75, rep=0,
        ops_total=100, ops_read=60, ops_write=40, fast_commits=95,
        fallback_commits=5, aborts=12, throughput=100 / 3, wall_seconds=3.0, validated=True,
    )
    fields.update(overrides)
    return BenchRecord(**fields)


def small_config(**overrides):
    fields = dict(mode=SPECULATIVE, threads=2, duration_seconds=0.2, write_pct=0.5,
                  random_nodes=500, seed=5, repetitions=1)
    fields.update(overrides)
    return build_config(**fields)


def parse_csv(data: bytes):
    return list(csv.reader(io.StringIO(data.decode("ascii"))))


class TestEmitCsv:
    def test_header_only(self):
        assert emit_csv([]) == (",".join(CSV_HEADER) + "\n").encode()
        assert CSV_HEADER[-1] == "throughput_ops_s"

    def test_one_row(self):
        rows = parse_csv(emit_csv([record()]))
        assert len(rows) == 2
        assert len(rows[1]) == 13
        assert rows[1] == ["speculative", "4", "10", "0.5", "2", "0", "100", "60", "40",
                           "95", "5", "12", "33.333333"]

    def test_without_header(self):
        assert len(parse_csv(emit_csv([record(), record(rep=1)], header=False))) == 2

    def test_mean_row_label(self):
        rows = parse_csv(emit_csv([record(rep="mean", ops_total=50.5, ops_read=30.25,
                                          ops_write=20.25, throughput=16.8)]))
        assert rows[1][5] == "mean"
        assert rows[1][6:9] == ["50.5", "30.25", "20.25"]

    def test_accounting_violation_refused(self):
        with pytest.raises(AccountingError):
            emit_csv([record(ops_total=101)])
        with pytest.raises(AccountingError):
            emit_csv([record(throughput=1.0)])
        with pytest.raises(AccountingError):
            emit_csv([record(mode=EngineKind.GLOBAL_RWLOCK)])


class TestMeanRecord:
    def test_means(self):
        mean = mean_record([record(), record(rep=1, ops_total=200, ops_read=120, ops_write=80,
                                             throughput=200 / 3)])
        assert mean.rep == "mean"
        assert mean.ops_total == 150
        assert mean.throughput == pytest.approx(50)
        assert mean.validated is True

    def test_validation_flags(self):
        assert mean_record([record(), record(validated=False)]).validated is False
        assert mean_record([record(), record(validated=None)]).validated is None

    def test_empty(self):
        with pytest.raises(ValueError):
            mean_record([])


class TestConfig:
    @pytest.mark.parametrize("overrides", [
        dict(threads=0),
        dict(duration_seconds=0),
        dict(write_pct=1.5),
        dict(repetitions=0),
        dict(input_path="tree.bp"),
    ])
    def test_invalid(self, overrides):
        with pytest.raises(ConfigError):
            small_config(**overrides)

    def test_missing_input_file(self, tmp_path):
        cfg = small_config(random_nodes=None, input_path=str(tmp_path / "missing.xml"))
        with pytest.raises(InputError):
            BenchmarkRunner(cfg)

    def test_unbalanced_input_file(self, tmp_path):
        path = tmp_path / "bad.bp"
        path.write_text("(()")
        with pytest.raises(InputError):
            BenchmarkRunner(small_config(random_nodes=None, input_path=str(path)))


class TestRuns:
    def test_read_only_single_thread(self):
        records, mean = run_benchmark(small_config(threads=1, write_pct=0.0, duration_seconds=0.3))
        rec = records[0]
        assert rec.ops_write == 0
        assert rec.aborts == 0
        assert rec.ops_total > 0
        assert rec.validated is True
        rec.check_accounting()
        mean.check_accounting()

    @pytest.mark.parametrize("mode", [SPECULATIVE, RWLOCK])
    def test_mixed_four_threads(self, mode):
        records, mean = run_benchmark(small_config(mode=mode, threads=4, repetitions=2))
        assert len(records) == 2
        for rec in records:
            assert rec.ops_total > 0
            assert rec.ops_total == rec.ops_read + rec.ops_write
            assert rec.fast_commits + rec.fallback_commits == rec.ops_total
            assert rec.validated is True
        assert mean.validated is True
        emit_csv(records + [mean])

    def test_input_file(self, tmp_path):
        path = tmp_path / "doc.xml"
        path.write_text("<r>" + "<a><b/></a>" * 200 + "</r>")
        records, _ = run_benchmark(small_config(random_nodes=None, input_path=str(path)))
        assert records[0].validated is True

    def test_forced_conflicts_only_fallback(self):
        runner = BenchmarkRunner(small_config(), conflict_hook=lambda: True)
        records, _ = runner.run()
        rec = records[0]
        assert rec.fast_commits == 0
        assert rec.fallback_commits == rec.ops_total
        assert rec.aborts == rec.ops_total * 3

    def test_records_echo_config(self):
        cfg = small_config(repetitions=2, leaf_fill=0.6)
        records, mean = run_benchmark(cfg)
        for rec in records + [mean]:
            assert (rec.input, rec.seed, rec.repetitions, rec.leaf_fill) == ("random:500", 5, 2, 0.6)
        assert small_config(random_nodes=None, input_path="doc.xml").input_label == "doc.xml"

    def test_writer_preferring_rwlock(self):
        records, _ = run_benchmark(small_config(mode=RWLOCK, threads=4, prefer_writers=True))
        assert records[0].ops_write > 0
        assert records[0].aborts == 0
        assert records[0].validated is True


class TestWorkload:
    def test_read_fraction_within_binomial_band(self):
        engine = ConcurrencyEngine(Rmmt.build(random_balanced(100, 0).seq), RWLOCK)
        for write_pct in (0.0, 0.1, 0.3, 0.5, 1.0):
            worker = BenchWorker(0, engine, write_pct, seed=9)
            draws = 20_000
            writes = sum(worker.next_request()[1] for _ in range(draws))
            low, high = binomial_band(draws, write_pct)
            assert low <= writes / draws <= high

    def test_request_stream_depends_only_on_seed(self):
        engine = ConcurrencyEngine(Rmmt.build(random_balanced(100, 0).seq), RWLOCK)
        a = BenchWorker(3, engine, 0.5, seed=10)
        b = BenchWorker(2, engine, 0.5, seed=11)
        names = [(a.next_request()[0].op_name, b.next_request()[0].op_name) for _ in range(200)]
        assert all(x == y for x, y in names)

    def test_scheduled_interleaving_gives_same_tree_in_every_mode(self):
        seq = random_balanced(300, seed=12).seq
        finals = []
        for mode in (RWLOCK, SPECULATIVE, ConcurrencyMode(kind=EngineKind.SPECULATIVE_FALLBACK,
                                                          retry_limit=0)):
            engine = ConcurrencyEngine(Rmmt.build(seq, leaf_cap=16), mode)
            workers = [BenchWorker(k, engine, write_pct=1.0, seed=40) for k in range(2)]
            schedule = np.random.default_rng(99).integers(0, 2, 1000)
            for step in schedule:
                request, _ = workers[step].next_request()
                engine.execute_write(request)
            assert engine.tree.validate().ok
            finals.append(engine.tree.to_sequence())
        assert finals[0] == finals[1] == finals[2]

    def test_delete_on_empty_tree_inserts(self):
        engine = ConcurrencyEngine(Rmmt.build(b""), SPECULATIVE)
        worker = BenchWorker(0, engine, write_pct=1.0, seed=1)
        for _ in range(50):
            worker.run_iteration(0.0)
        assert engine.tree.validate().ok
        assert engine.snapshot_stats().writes_done == 50

    def test_delete_picks_leaf_pairs_uniformly(self):
        rng = np.random.default_rng(21)
        trials = 3000
        counts = Counter()
        for _ in range(trials):
            flat = FlatTree("(()(()()))")
            counts[delete_request(rng.random(DELETE_DRAWS).tolist())(flat, None)] += 1
        assert set(counts) == {1, 4, 6}
        low, high = binomial_band(trials, 1 / 3)
        for pos in (1, 4, 6):
            assert low <= counts[pos] / trials <= high, counts

    def test_delete_falls_back_when_every_draw_misses(self):
        flat = FlatTree("((()))")
        assert delete_request([0.0, 0.99])(flat, None) == 2
        assert flat.text() == "(())"


class TestCli:
    def test_benchmark_to_csv_file(self, tmp_path, capsys):
        out = tmp_path / "run.csv"
        code = bench_cli.main(["--mode", "speculative", "--threads", "2", "--duration", "0.2",
                               "--write-pct", "0.3", "--random-nodes", "400", "--reps", "2",
                               "--csv", str(out)])
        assert code == 0
        rows = parse_csv(out.read_bytes())
        assert rows[0] == list(CSV_HEADER)
        assert [r[5] for r in rows[1:]] == ["0", "1", "mean"]
        assert "Results saved to" in capsys.readouterr().out

    def test_benchmark_to_stdout(self, capsys):
        code = bench_cli.main(["--mode", "rwlock", "--threads", "1", "--duration", "0.1",
                               "--write-pct", "0", "--random-nodes", "100", "--reps", "1"])
        assert code == 0
        rows = parse_csv(capsys.readouterr().out.encode())
        assert rows[0] == list(CSV_HEADER)
        assert rows[1][0] == "rwlock"

    def test_prefer_writers_flag(self, capsys):
        code = bench_cli.main(["--mode", "rwlock", "--threads", "3", "--duration", "0.1",
                               "--write-pct", "0.5", "--random-nodes", "100", "--reps", "1",
                               "--prefer-writers"])
        assert code == 0
        assert parse_csv(capsys.readouterr().out.encode())[1][0] == "rwlock"

    @pytest.mark.parametrize("argv", [
        ["--mode", "speculative", "--threads", "2", "--write-pct", "1.5", "--random-nodes", "10"],
        ["--mode", "optimistic", "--threads", "2", "--write-pct", "0.5", "--random-nodes", "10"],
        ["--mode", "rwlock", "--threads", "0", "--write-pct", "0.5", "--random-nodes", "10"],
        ["--mode", "rwlock", "--threads", "2", "--write-pct", "0.5"],
    ])
    def test_config_errors(self, argv):
        assert bench_cli.main(argv) == bench_cli.EXIT_CONFIG

    def test_input_errors(self, tmp_path):
        missing = str(tmp_path / "missing.xml")
        argv = ["--mode", "rwlock", "--threads", "1", "--write-pct", "0", "--duration", "0.1"]
        assert bench_cli.main(argv + ["--input", missing]) == bench_cli.EXIT_INPUT
        bad = tmp_path / "bad.xml"
        bad.write_text("<a><b></a>")
        assert bench_cli.main(argv + ["--input", str(bad)]) == bench_cli.EXIT_INPUT

    def test_convert_xml_to_packed(self, tmp_path, capsys):
        src = tmp_path / "doc.xml"
        src.write_text("<a><b/><c><d/></c></a>")
        out = tmp_path / "doc.bpk"
        assert convert_bp.main([str(src), "-o", str(out), "-f", "packed"]) == 0
        assert load_document(str(out)).seq == bytes([1, 1, 0, 1, 1, 0, 0, 0])
        printed = capsys.readouterr().out
        assert "✓ Conversion complete" in printed
        assert "Max depth" in printed

    def test_convert_random_to_text(self, tmp_path):
        out = tmp_path / "rand.bp"
        assert convert_bp.main(["--random-nodes", "50", "--seed", "3", "-o", str(out)]) == 0
        assert load_document(str(out)).seq == random_balanced(50, 3).seq

    def test_convert_errors(self, tmp_path):
        out = str(tmp_path / "x.bp")
        assert convert_bp.main([str(tmp_path / "missing.xml"), "-o", out]) == 1
        assert convert_bp.main(["-o", out]) == 1
        bad = tmp_path / "bad.bp"
        bad.write_text("(()")
        assert convert_bp.main([str(bad), "-o", out]) == 1


@pytest.mark.slow
class TestAcceptance:
    @pytest.mark.parametrize("mode", [
        RWLOCK,
        ConcurrencyMode(kind=EngineKind.SPECULATIVE_FALLBACK, retry_limit=0),
        ConcurrencyMode(kind=EngineKind.SPECULATIVE_FALLBACK, retry_limit=1),
        SPECULATIVE,
    ])
    def test_stress_quiescence(self, mode):
        records, mean = run_benchmark(small_config(mode=mode, threads=260, duration_seconds=10,
                                                   random_nodes=100_000))
        for rec in records + [mean]:
            rec.check_accounting()
        assert mean.validated is True

    def _throughputs(self, write_pct, threads):
        result = {}
        for mode in (RWLOCK, SPECULATIVE):
            _, mean = run_benchmark(small_config(mode=mode, threads=threads, write_pct=write_pct,
                                                 duration_seconds=10, repetitions=3,
                                                 random_nodes=100_000))
            result[mode.kind] = mean.throughput
        return result[EngineKind.SPECULATIVE_FALLBACK], result[EngineKind.GLOBAL_RWLOCK]

    def test_speculative_not_slower_under_oversubscription(self):
        cores = os.cpu_count() or 1
        if cores < 4:
            pytest.skip("needs at least 4 cores")
        speculative, rwlock = self._throughputs(0.5, 40 * cores)
        ratio = speculative / rwlock
        assert ratio >= 0.9
        if ratio < 1.0:
            warnings.warn(f"speculative/rwlock throughput ratio {ratio:.3f} below 1.0")

    def test_low_write_parity(self):
        speculative, rwlock = self._throughputs(0.1, 40)
        assert abs(speculative - rwlock) <= 0.25 * max(speculative, rwlock)
