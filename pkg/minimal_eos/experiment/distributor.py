"""distributors run sweep cells sequentially or on several processes; results keep the task order"""

import multiprocessing


class SequentialDistributor:
    def __init__(self, tasks, worker):
        self.tasks = tasks
        self.worker = worker

    def __call__(self):
        """
        call the worker on every task in order.
        """
        return [self.worker(task) for task in self.tasks]


class MultiprocessingDistributor:
    """the multiprocessing distributor spreads cells over a spawn pool"""

    def __init__(self, tasks, worker, processes=None):
        self.tasks = tasks
        self.worker = worker
        self.processes = processes

    def __call__(self):
        """
        Parallelize work and call the worker, the returned list follows the task order.
        """
        ctx = multiprocessing.get_context("spawn")
        processes = self.processes or min(len(self.tasks), ctx.cpu_count()) or 1
        with ctx.Pool(processes=processes) as pool:
            return pool.map(self.worker, self.tasks, chunksize=1)


DISTRIBUTORS = {
    "sequential": SequentialDistributor,
    "multiprocessing": MultiprocessingDistributor,
}


def make_distributor(distribution_strategy, tasks, worker, processes=None):
    if distribution_strategy == "sequential":
        return SequentialDistributor(tasks=tasks, worker=worker)
    if distribution_strategy == "multiprocessing":
        return MultiprocessingDistributor(tasks=tasks, worker=worker, processes=processes)
    raise ValueError(
        f"The {distribution_strategy} strategy is not implemented. Please choose from: [{', '.join(DISTRIBUTORS)}]"
    )
