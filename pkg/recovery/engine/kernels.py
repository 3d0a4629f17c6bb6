"""Numba-compiled inner loops for SGD training.

Arrays are modified in place. ``nogil`` lets independent fits share the thread pool.
"""

import numpy as np
from numba import njit


@njit(nogil=True, cache=True)
def sgd_epoch(
    users,
    items,
    ratings,
    order,
    mu,
    user_bias,
    item_bias,
    P,
    Q,
    gamma,
    lambda_bi,
    lambda_bu,
    lambda_qi,
    lambda_pu,
    clamp_each,
):
    """One pass over the observed ratings in ``order``.

    ``P`` is n_users x f (rows p_u), ``Q`` is n_items x f (rows q_i).
    """
    n_factors = P.shape[1]
    q_old = np.empty(n_factors)
    p_old = np.empty(n_factors)
    for k in range(order.shape[0]):
        idx = order[k]
        u = users[idx]
        i = items[idx]

        dot = 0.0
        for f in range(n_factors):
            dot += Q[i, f] * P[u, f]
        e = ratings[idx] - (mu + user_bias[u] + item_bias[i] + dot)

        item_bias[i] += gamma * (e - lambda_bi * item_bias[i])
        user_bias[u] += gamma * (e - lambda_bu * user_bias[u])

        for f in range(n_factors):
            q_old[f] = Q[i, f]
            p_old[f] = P[u, f]
        for f in range(n_factors):
            q_new = q_old[f] + gamma * (e * p_old[f] - lambda_qi * q_old[f])
            p_new = p_old[f] + gamma * (e * q_old[f] - lambda_pu * p_old[f])
            if clamp_each:
                if q_new < 0.0:
                    q_new = 0.0
                if p_new < 0.0:
                    p_new = 0.0
            Q[i, f] = q_new
            P[u, f] = p_new


@njit(nogil=True, cache=True)
def observed_rmse(users, items, ratings, mu, user_bias, item_bias, P, Q):
    """RMSE of the biased factor model over the observed ratings."""
    n_factors = P.shape[1]
    total = 0.0
    for idx in range(ratings.shape[0]):
        u = users[idx]
        i = items[idx]
        dot = 0.0
        for f in range(n_factors):
            dot += Q[i, f] * P[u, f]
        e = ratings[idx] - (mu + user_bias[u] + item_bias[i] + dot)
        total += e * e
    return np.sqrt(total / ratings.shape[0])
