import json
import tempfile

from minimal_eos.experiment.logger import LoggerReader, LoggerWriter


def test_logger():
    with tempfile.TemporaryDirectory() as tmpdir:
        stats_folder = tmpdir + "/stats"
        for i in range(3):
            writer = LoggerWriter(partition_id=i, stats_folder=stats_folder)
            writer.start()
            writer({"steps": 100, "diverged": 0})
            writer({"steps": 50, "failed": int(i == 2)})
            writer.end()

        with open(stats_folder + "/1.json", encoding="utf-8") as f:
            stats = json.load(f)
        assert stats["steps"] == 150
        assert stats["total_duration"] >= 0

        aggregated = LoggerReader(stats_folder).log()
        assert aggregated["cell_count"] == 3
        assert aggregated["steps"] == 450
        assert aggregated["failed"] == 1
        assert aggregated["diverged"] == 0


def test_logger_reader_without_stats():
    with tempfile.TemporaryDirectory() as tmpdir:
        assert LoggerReader(tmpdir + "/missing").read() == {}
