from joblib import Parallel, delayed


def pmap(func, items, n_jobs=None):
    """Ordered map; runs serially unless ``n_jobs`` asks for more than one worker."""
    items = list(items)
    if n_jobs in (None, 0, 1) or len(items) < 2:
        return [func(it) for it in items]
    return Parallel(n_jobs=n_jobs)(delayed(func)(it) for it in items)
