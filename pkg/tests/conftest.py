import numpy as np
import pytest

from capclust.instance import Instance, Metric


def plane_instance(client_pts, facility_pts, k, eta, p=1.0) -> Instance:
    """Build a plane instance from explicit coordinate lists."""
    table: dict[tuple[float, float], int] = {}
    for pt in list(client_pts) + list(facility_pts):
        key = (float(pt[0]), float(pt[1]))
        if key not in table:
            table[key] = len(table)
    coords = np.array(list(table.keys()), dtype=float)
    metric = Metric("plane", coords=coords)
    clients = tuple(table[(float(p_[0]), float(p_[1]))] for p_ in client_pts)
    facs = []
    for pt in facility_pts:
        fid = table[(float(pt[0]), float(pt[1]))]
        if fid not in facs:
            facs.append(fid)
    return Instance(metric, clients, tuple(facs), k, eta, p)


@pytest.fixture
def line3():
    # clients at 0, 1, 3 on a line; facilities at 0 and 3
    return plane_instance([(0, 0), (1, 0), (3, 0)], [(0, 0), (3, 0)],
                          k=2, eta=2, p=2.0)
