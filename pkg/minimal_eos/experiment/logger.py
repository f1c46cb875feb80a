"""The logger module writes per cell stats to json files and aggregates them to stdout and wandb"""

import json
import logging
import time
from collections import defaultdict

import fsspec
import wandb

LOGGER = logging.getLogger(__name__)


class LoggerWriter:
    """the logger writer writes the stats of one sweep cell to a json file"""

    def __init__(self, partition_id, stats_folder):
        self.partition_id = partition_id
        self.stats_folder = stats_folder
        self.stats = defaultdict(lambda: 0)

    def start(self):
        self.stats = defaultdict(lambda: 0)
        self.stats["start_time"] = time.time()

    def __call__(self, stats):
        for k in stats:
            self.stats[k] += stats[k]

    def end(self):
        self.stats["end_time"] = time.time()
        self.stats["total_duration"] = self.stats["end_time"] - self.stats["start_time"]
        fs, relative_path = fsspec.core.url_to_fs(self.stats_folder)
        fs.makedirs(relative_path, exist_ok=True)
        with fs.open(relative_path + f"/{self.partition_id}.json", "w") as f:
            f.write(json.dumps(dict(self.stats)))


class LoggerReader:
    """the logger reader reads stats of all json files and aggregates them"""

    def __init__(self, stats_folder, wandb_project="minimal_eos", enable_wandb=False):
        self.stats_folder = stats_folder
        self.enable_wandb = enable_wandb
        self.wandb_project = wandb_project

    def read(self):
        fs, relative_path = fsspec.core.url_to_fs(self.stats_folder, use_listings_cache=False)
        if not fs.exists(relative_path):
            return {}
        stats_aggregated = defaultdict(lambda: 0)
        start_time, end_time = float("inf"), float("-inf")
        for path in sorted(fs.glob(relative_path + "/*.json")):
            with fs.open(path, "r") as f:
                stats = json.loads(f.read())
            stats_aggregated["cell_count"] += 1
            for k, v in stats.items():
                if k in ("start_time", "end_time"):
                    continue
                stats_aggregated[k] += v
            start_time = min(start_time, stats.get("start_time", start_time))
            end_time = max(end_time, stats.get("end_time", end_time))
        if stats_aggregated["cell_count"] and end_time > start_time:
            stats_aggregated["wall_duration"] = end_time - start_time
            stats_aggregated["steps_per_sec"] = stats_aggregated["steps"] / stats_aggregated["wall_duration"]
        return dict(stats_aggregated)

    def log(self):
        """print the aggregated stats and forward them to wandb when enabled"""
        stats = self.read()
        if not stats:
            LOGGER.info("no stats to aggregate")
            return stats
        print(
            f"cells {stats['cell_count']} ; steps {stats.get('steps', 0)} ; "
            f"diverged {stats.get('diverged', 0)} ; failed {stats.get('failed', 0)}"
        )
        if self.enable_wandb:
            current_run = wandb.init(project=self.wandb_project)
            wandb.log(stats)
            current_run.finish()
        return stats
