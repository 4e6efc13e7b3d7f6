# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# cython: language_level=3
"""C chain kernel for the built-in potentials (quadratic, double well).

One call advances a single chain through one pre-generated block of standard
normal noise.  The Python driver owns the RNG, so the compiled and fallback
backends consume identical noise streams; only the drift arithmetic lives
here.  Divergence (norm above threshold, or non-finite state) freezes the
chain: the divergent step is reported and neither the moment accumulators
nor the kept samples include it.
"""

from libc.math cimport pow


def run_block(int kind, int algo, double[::1] theta, double pot_a,
              double a_split, double half_m, double eps_h, double lam,
              double noise_coef, double thr2,
              double[:, ::1] noise,
              long long n_done, long long burn_in, long long thinning,
              double[:, ::1] kept_out, long long kept_count,
              double[::1] acc):
    """Advance one noise block; returns (n_done, kept_count, diverged_step).

    kind: 1 quadratic (gradient pot_a * theta), 2 double well.
    algo: 0 tamed, 1 plain.
    acc holds running sums of |theta|^2,4,6,8 and the max running mean of
    |theta|^2, updated in place.
    """
    cdef Py_ssize_t d = theta.shape[0]
    cdef Py_ssize_t nrows = noise.shape[0]
    cdef Py_ssize_t i, j
    cdef double r2, r4, c, h_i, denom, rho, rm
    cdef double s2 = acc[0], s4 = acc[1], s6 = acc[2], s8 = acc[3], maxrm = acc[4]
    cdef long long n = n_done
    cdef long long kept = kept_count
    cdef long long diverged = -1
    cdef long long since

    with nogil:
        r2 = 0.0
        for i in range(d):
            r2 += theta[i] * theta[i]
        for j in range(nrows):
            if algo == 1:
                if kind == 1:
                    for i in range(d):
                        theta[i] = theta[i] - lam * (pot_a * theta[i]) \
                            + noise_coef * noise[j, i]
                else:
                    c = r2 - 1.0
                    for i in range(d):
                        theta[i] = theta[i] - lam * (theta[i] * c) \
                            + noise_coef * noise[j, i]
            else:
                rho = pow(r2, half_m)
                denom = pow(1.0 + lam * rho, eps_h)
                if kind == 1:
                    for i in range(d):
                        h_i = pot_a * theta[i]
                        theta[i] = theta[i] - lam * (a_split * theta[i]
                            + (h_i - a_split * theta[i]) / denom) \
                            + noise_coef * noise[j, i]
                else:
                    c = r2 - 1.0
                    for i in range(d):
                        h_i = theta[i] * c
                        theta[i] = theta[i] - lam * (a_split * theta[i]
                            + (h_i - a_split * theta[i]) / denom) \
                            + noise_coef * noise[j, i]
            n += 1
            r2 = 0.0
            for i in range(d):
                r2 += theta[i] * theta[i]
            if r2 <= thr2:
                s2 += r2
                r4 = r2 * r2
                s4 += r4
                s6 += r4 * r2
                s8 += r4 * r4
                rm = s2 / n
                if rm > maxrm:
                    maxrm = rm
                since = n - burn_in
                if since > 0 and since % thinning == 0:
                    for i in range(d):
                        kept_out[kept, i] = theta[i]
                    kept += 1
            else:
                diverged = n
                break

    acc[0] = s2
    acc[1] = s4
    acc[2] = s6
    acc[3] = s8
    acc[4] = maxrm
    return n, kept, diverged
