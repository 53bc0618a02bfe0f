import numpy as np


def nearest_point(point, candidates):
    """
    Find the candidate closest to a point.
    :param point: Query vector.
    :param candidates: List of vectors.
    :return: (index, distance), or (None, inf) when there are no candidates.
    """
    if len(candidates) == 0:
        return None, np.inf
    distances = [float(np.linalg.norm(np.asarray(point) - np.asarray(c))) for c in candidates]
    index = int(np.argmin(distances))
    return index, distances[index]


def cluster_points(points, radius: float) -> list:
    """
    Greedy deduplication: a point joins the first representative within radius, else becomes one.
    :return: List of representatives, in order of first appearance.
    """
    representatives = []
    for p in points:
        p = np.asarray(p, dtype=float)
        index, distance = nearest_point(p, representatives)
        if index is None or distance > radius:
            representatives.append(p)
    return representatives


def unit_directions(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """
    Uniformly distributed directions on the unit sphere, one per row.
    """
    directions = rng.standard_normal((count, dim))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)
