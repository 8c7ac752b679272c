import heapq
import itertools
import threading

PRIORITY_HIGH = 0
PRIORITY_NORMAL = 5
PRIORITY_LOW = 10


class Task(object):
    def __init__(self, name, func, args=(), priority=PRIORITY_NORMAL):
        self.name = name
        self.func = func
        self.args = args
        self.priority = priority
        self.done = False
        self.result = None
        self.error = None

    def run(self):
        try:
            self.result = self.func(*self.args)
        except Exception as exc:
            self.error = exc
        finally:
            self.done = True
        return self.error is None


class Scheduler(object):
    def __init__(self):
        self.queue = []
        self.counter = itertools.count()
        self.lock = threading.Lock()
        self.completed = []
        self.failed = []

    def submit(self, task):
        with self.lock:
            heapq.heappush(self.queue, (task.priority, next(self.counter), task))
        return task

    def pending(self):
        return len(self.queue)

    def next_task(self):
        with self.lock:
            if not self.queue:
                return None
            priority, _, task = heapq.heappop(self.queue)
        return task

    def run_all(self, limit=None):
        count = 0
        while limit is None or count < limit:
            task = self.next_task()
            if task is None:
                break
            if task.run():
                self.completed.append(task)
            else:
                self.failed.append(task)
            count += 1
        return count

    def summary(self):
        names = [t.name for t in self.completed]
        errors = dict([(t.name, str(t.error)) for t in self.failed])
        return {"completed": names, "failed": errors}


def retry(task, attempts=3):
    for attempt in range(attempts):
        if task.run():
            return True
        task.done = False
    return False


def run_parallel(tasks, workers=4):
    threads = []
    chunks = [tasks[i::workers] for i in range(workers)]
    for chunk in chunks:
        t = threading.Thread(target=run_chunk, args=(chunk,))
        t.start()
        threads.append(t)
    for t in threads:
        t.join()
    return all([task.done for task in tasks])


def run_chunk(chunk):
    for task in chunk:
        task.run()
