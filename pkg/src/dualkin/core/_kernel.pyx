# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled filter pass.

Runs the whole EKF batch loop in C: forward kinematics, analytic
measurement Jacobian, predict/update with Cholesky factorization of the
innovation covariance, Joseph-form covariance update.  Mirrors the pure
Python pass composed from the public modules; every formula here has a
counterpart there, and the equivalence is covered by tests.
"""

from libc.math cimport sqrt, sin, cos, log
from libc.stdint cimport int64_t
from libc.string cimport memset

import numpy as np


class KernelNumericalError(Exception):
    """Innovation covariance factorization failed inside the kernel."""


cdef double SMALL_ANGLE = 1e-6
cdef double COND_LIMIT = 1e12


cdef inline void rod3(const double* phi, double* R) noexcept nogil:
    cdef double t2 = phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2]
    cdef double t = sqrt(t2)
    cdef double c1, c2
    if t < SMALL_ANGLE:
        c1 = 1.0 - t2 / 6.0
        c2 = 0.5 - t2 / 24.0
    else:
        c1 = sin(t) / t
        c2 = (1.0 - cos(t)) / t2
    R[0] = 1.0 + c2 * (phi[0] * phi[0] - t2)
    R[1] = c2 * phi[0] * phi[1] - c1 * phi[2]
    R[2] = c2 * phi[0] * phi[2] + c1 * phi[1]
    R[3] = c2 * phi[0] * phi[1] + c1 * phi[2]
    R[4] = 1.0 + c2 * (phi[1] * phi[1] - t2)
    R[5] = c2 * phi[1] * phi[2] - c1 * phi[0]
    R[6] = c2 * phi[0] * phi[2] - c1 * phi[1]
    R[7] = c2 * phi[1] * phi[2] + c1 * phi[0]
    R[8] = 1.0 + c2 * (phi[2] * phi[2] - t2)


cdef inline void cross3(const double* a, const double* b, double* out) noexcept nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline void skew3(const double* v, double* S) noexcept nogil:
    S[0] = 0.0;    S[1] = -v[2]; S[2] = v[1]
    S[3] = v[2];   S[4] = 0.0;   S[5] = -v[0]
    S[6] = -v[1];  S[7] = v[0];  S[8] = 0.0


cdef inline void m3v(const double* A, const double* v, double* out) noexcept nogil:
    out[0] = A[0] * v[0] + A[1] * v[1] + A[2] * v[2]
    out[1] = A[3] * v[0] + A[4] * v[1] + A[5] * v[2]
    out[2] = A[6] * v[0] + A[7] * v[1] + A[8] * v[2]


cdef inline void m3tv(const double* A, const double* v, double* out) noexcept nogil:
    out[0] = A[0] * v[0] + A[3] * v[1] + A[6] * v[2]
    out[1] = A[1] * v[0] + A[4] * v[1] + A[7] * v[2]
    out[2] = A[2] * v[0] + A[5] * v[1] + A[8] * v[2]


cdef inline void m3m(const double* A, const double* B, double* C) noexcept nogil:
    cdef int i, j, k
    for i in range(3):
        for j in range(3):
            C[3 * i + j] = A[3 * i] * B[j] + A[3 * i + 1] * B[3 + j] + A[3 * i + 2] * B[6 + j]


cdef inline void m3_mul_3n(const double* A, const double* M, double* out, int n) noexcept nogil:
    # out(3,n) = A(3,3) @ M(3,n)
    cdef int c
    for c in range(n):
        out[c] = A[0] * M[c] + A[1] * M[n + c] + A[2] * M[2 * n + c]
        out[n + c] = A[3] * M[c] + A[4] * M[n + c] + A[5] * M[2 * n + c]
        out[2 * n + c] = A[6] * M[c] + A[7] * M[n + c] + A[8] * M[2 * n + c]


cdef inline void m3t_mul_3n(const double* A, const double* M, double* out, int n) noexcept nogil:
    # out(3,n) = A^T(3,3) @ M(3,n)
    cdef int c
    for c in range(n):
        out[c] = A[0] * M[c] + A[3] * M[n + c] + A[6] * M[2 * n + c]
        out[n + c] = A[1] * M[c] + A[4] * M[n + c] + A[7] * M[2 * n + c]
        out[2 * n + c] = A[2] * M[c] + A[5] * M[n + c] + A[8] * M[2 * n + c]


# J buffer layout: body-major, then matrix slot, then row, then column.
# Slots: 0 pos_q, 1 vel_q, 2 acc_qd, 3 acc_q, 4 ang_vel_qd, 5 ang_vel_q,
#        6 ang_acc_qd, 7 ang_acc_q.
cdef inline double* jmat(double* J, int body, int slot, int n) noexcept nogil:
    return J + ((body * 8 + slot) * 3) * n


cdef void translational_step(
    const double* prev_pos_q, const double* prev_vel_q,
    const double* prev_acc_qd, const double* prev_acc_q,
    const double* ang_vel_qd, const double* ang_vel_q,
    const double* ang_acc_qd, const double* ang_acc_q,
    const double* C, const double* w, const double* wd, const double* p,
    double* out_pos_q, double* out_vel_q, double* out_acc_qd, double* out_acc_q,
    double* scratch, int n,
) noexcept nogil:
    # Shift the translational set across rigid offset p carried by a body
    # with rotation C and angular rates w, wd (same math for links and
    # sensor lever arms).  scratch must hold 2 * 3n doubles.
    cdef double px[9]
    cdef double u1x[9]
    cdef double mix[9]
    cdef double cen[9]
    cdef double u1[3]
    cdef double u2[3]
    cdef double u3[3]
    cdef double wx[9]
    cdef double tmp9[9]
    cdef double* inner = scratch
    cdef double* outer = scratch + 3 * n
    cdef int i, c
    skew3(p, px)
    cross3(w, p, u1)
    skew3(u1, u1x)
    skew3(w, wx)
    m3m(wx, px, tmp9)
    for i in range(9):
        mix[i] = u1x[i] + tmp9[i]
    cross3(w, u1, u2)
    cross3(wd, p, u3)
    for i in range(3):
        u2[i] += u3[i]
    skew3(u2, cen)

    # pos_q
    m3_mul_3n(px, ang_vel_qd, inner, n)
    m3_mul_3n(C, inner, outer, n)
    for c in range(3 * n):
        out_pos_q[c] = prev_pos_q[c] - outer[c]
    # vel_q
    m3_mul_3n(u1x, ang_vel_qd, inner, n)
    m3_mul_3n(px, ang_vel_q, outer, n)
    for c in range(3 * n):
        inner[c] += outer[c]
    m3_mul_3n(C, inner, outer, n)
    for c in range(3 * n):
        out_vel_q[c] = prev_vel_q[c] - outer[c]
    # acc_qd
    m3_mul_3n(mix, ang_vel_qd, inner, n)
    m3_mul_3n(px, ang_acc_qd, outer, n)
    for c in range(3 * n):
        inner[c] += outer[c]
    m3_mul_3n(C, inner, outer, n)
    for c in range(3 * n):
        out_acc_qd[c] = prev_acc_qd[c] - outer[c]
    # acc_q
    m3_mul_3n(cen, ang_vel_qd, inner, n)
    m3_mul_3n(mix, ang_vel_q, outer, n)
    for c in range(3 * n):
        inner[c] += outer[c]
    m3_mul_3n(px, ang_acc_q, outer, n)
    for c in range(3 * n):
        inner[c] += outer[c]
    m3_mul_3n(C, inner, outer, n)
    for c in range(3 * n):
        out_acc_q[c] = prev_acc_q[c] - outer[c]


cdef int pass_core(
    int n, int M, int K, int joseph,
    const double* axes, const double* rho,
    const double* R0, const double* w0, const double* wd0, const double* a0,
    const int64_t* mbody, const double* mR, const double* mr,
    const double* grav, const double* qv, const double* qeps,
    const double* tgrid, const double* Y, double t0,
    double* x, double* P,
    double* xp, double* F, double* Qw, double* Pp, double* T1, double* T2,
    double* Rb, double* wb, double* wdb, double* ab,
    double* J, double* Js, double* scratch,
    double* H, double* hvec, double* dy, double* HP, double* W, double* Kg, double* u,
    double* out_s, double* records, double* xhat_out,
) noexcept nogil:
    cdef int s3 = 3 * n
    cdef int m6 = 6 * M
    cdef int k, i, j, c, b, r, jj, col
    cdef double dt, dt2, dt3, dt4, dt5, e
    cdef double t_prev = t0
    cdef double phi[3]
    cdef double A[9]
    cdef double tmp3a[3]
    cdef double tmp3b[3]
    cdef double tmp3c[3]
    cdef double waxis[3]
    cdef double nx[9]
    cdef double Rj[9]
    cdef double accel[3]
    cdef double acc = 0.0
    cdef double diag_min, diag_max, dval, ssum, quad, logdet
    cdef double* body_prev
    cdef double* body_cur
    cdef double* avqd
    cdef double* avq
    cdef double* aaqd
    cdef double* aaq

    out_s[0] = 0.0
    for k in range(K):
        dt = tgrid[k] - t_prev
        t_prev = tgrid[k]
        if dt <= 0.0:
            return -(k + 1)
        # --- predict state: triple integrator per joint
        dt2 = dt * dt
        for i in range(n):
            xp[i] = x[i] + dt * x[n + i] + 0.5 * dt2 * x[2 * n + i]
            xp[n + i] = x[n + i] + dt * x[2 * n + i]
            xp[2 * n + i] = x[2 * n + i]
        # --- F and per-step process noise
        memset(F, 0, s3 * s3 * sizeof(double))
        memset(Qw, 0, s3 * s3 * sizeof(double))
        dt3 = dt2 * dt
        dt4 = dt3 * dt
        dt5 = dt4 * dt
        for i in range(s3):
            F[i * s3 + i] = 1.0
        for i in range(n):
            F[i * s3 + n + i] = dt
            F[i * s3 + 2 * n + i] = 0.5 * dt2
            F[(n + i) * s3 + 2 * n + i] = dt
            e = qeps[i]
            Qw[i * s3 + i] = dt5 / 20.0 * e
            Qw[i * s3 + n + i] = dt4 / 8.0 * e
            Qw[(n + i) * s3 + i] = dt4 / 8.0 * e
            Qw[i * s3 + 2 * n + i] = dt3 / 6.0 * e
            Qw[(2 * n + i) * s3 + i] = dt3 / 6.0 * e
            Qw[(n + i) * s3 + (n + i)] = dt3 / 3.0 * e
            Qw[(n + i) * s3 + 2 * n + i] = dt2 / 2.0 * e
            Qw[(2 * n + i) * s3 + n + i] = dt2 / 2.0 * e
            Qw[(2 * n + i) * s3 + 2 * n + i] = dt * e
        # --- predict covariance: Pp = F P F^T + Qw
        for i in range(s3):
            for j in range(s3):
                acc = 0.0
                for c in range(s3):
                    acc += F[i * s3 + c] * P[c * s3 + j]
                T1[i * s3 + j] = acc
        for i in range(s3):
            for j in range(s3):
                acc = Qw[i * s3 + j]
                for c in range(s3):
                    acc += T1[i * s3 + c] * F[j * s3 + c]
                Pp[i * s3 + j] = acc

        # --- forward kinematics at predicted state
        for i in range(9):
            Rb[i] = R0[i]
        for i in range(3):
            wb[i] = w0[i]
            wdb[i] = wd0[i]
            ab[i] = a0[i]
        memset(J, 0, (n + 1) * 8 * 3 * n * sizeof(double))
        for i in range(n):
            b = i + 1
            phi[0] = axes[3 * i] * xp[i]
            phi[1] = axes[3 * i + 1] * xp[i]
            phi[2] = axes[3 * i + 2] * xp[i]
            rod3(phi, A)
            m3m(&Rb[9 * i], A, &Rb[9 * b])
            # angular velocity / acceleration
            m3tv(A, &wb[3 * i], tmp3a)
            for c in range(3):
                wb[3 * b + c] = tmp3a[c] + axes[3 * i + c] * xp[n + i]
            cross3(&wb[3 * b], &axes[3 * i], waxis)
            m3tv(A, &wdb[3 * i], tmp3a)
            for c in range(3):
                wdb[3 * b + c] = tmp3a[c] + waxis[c] * xp[n + i] + axes[3 * i + c] * xp[2 * n + i]
            # linear acceleration of next origin
            cross3(&wb[3 * i], &rho[3 * i], tmp3a)
            cross3(&wb[3 * i], tmp3a, tmp3b)
            cross3(&wdb[3 * i], &rho[3 * i], tmp3c)
            for c in range(3):
                tmp3b[c] += tmp3c[c]
            m3v(&Rb[9 * i], tmp3b, tmp3a)
            for c in range(3):
                ab[3 * b + c] = ab[3 * i + c] + tmp3a[c]

            # --- angular sensitivity recursion
            body_prev = jmat(J, i, 0, n)
            body_cur = jmat(J, b, 0, n)
            avqd = jmat(J, b, 4, n)
            avq = jmat(J, b, 5, n)
            aaqd = jmat(J, b, 6, n)
            aaq = jmat(J, b, 7, n)
            skew3(&axes[3 * i], nx)
            m3t_mul_3n(A, jmat(J, i, 4, n), avqd, n)
            for c in range(3):
                avqd[c * n + i] += axes[3 * i + c]
            m3t_mul_3n(A, jmat(J, i, 5, n), avq, n)
            for c in range(3):
                avq[c * n + i] += waxis[c]
            m3t_mul_3n(A, jmat(J, i, 6, n), aaqd, n)
            m3_mul_3n(nx, avqd, scratch, n)
            for c in range(3 * n):
                aaqd[c] -= xp[n + i] * scratch[c]
            for c in range(3):
                aaqd[c * n + i] += waxis[c]
            m3t_mul_3n(A, jmat(J, i, 7, n), aaq, n)
            m3_mul_3n(nx, avq, scratch, n)
            for c in range(3 * n):
                aaq[c] -= xp[n + i] * scratch[c]
            for c in range(3):
                tmp3a[c] = wdb[3 * b + c] - xp[n + i] * waxis[c]
            cross3(tmp3a, &axes[3 * i], tmp3b)
            for c in range(3):
                aaq[c * n + i] += tmp3b[c]

            # --- translational sensitivity recursion (uses predecessor sets)
            translational_step(
                jmat(J, i, 0, n), jmat(J, i, 1, n), jmat(J, i, 2, n), jmat(J, i, 3, n),
                jmat(J, i, 4, n), jmat(J, i, 5, n), jmat(J, i, 6, n), jmat(J, i, 7, n),
                &Rb[9 * i], &wb[3 * i], &wdb[3 * i], &rho[3 * i],
                body_cur, jmat(J, b, 1, n), jmat(J, b, 2, n), jmat(J, b, 3, n),
                scratch, n,
            )

        # --- sensors: h and H rows
        memset(H, 0, m6 * s3 * sizeof(double))
        for jj in range(M):
            b = <int> mbody[jj]
            # sensor translational set into Js slots 0..3; angular 4..7
            translational_step(
                jmat(J, b, 0, n), jmat(J, b, 1, n), jmat(J, b, 2, n), jmat(J, b, 3, n),
                jmat(J, b, 4, n), jmat(J, b, 5, n), jmat(J, b, 6, n), jmat(J, b, 7, n),
                &Rb[9 * b], &wb[3 * b], &wdb[3 * b], &mr[3 * jj],
                jmat(Js, 0, 0, n), jmat(Js, 0, 1, n), jmat(Js, 0, 2, n), jmat(Js, 0, 3, n),
                scratch, n,
            )
            m3t_mul_3n(&mR[9 * jj], jmat(J, b, 4, n), jmat(Js, 0, 4, n), n)
            m3t_mul_3n(&mR[9 * jj], jmat(J, b, 5, n), jmat(Js, 0, 5, n), n)
            m3m(&Rb[9 * b], &mR[9 * jj], Rj)
            # noise-free readings
            cross3(&wb[3 * b], &mr[3 * jj], tmp3a)
            cross3(&wb[3 * b], tmp3a, tmp3b)
            cross3(&wdb[3 * b], &mr[3 * jj], tmp3c)
            for c in range(3):
                tmp3b[c] += tmp3c[c]
            m3v(&Rb[9 * b], tmp3b, tmp3a)
            for c in range(3):
                tmp3a[c] += ab[3 * b + c] + grav[c]
            m3tv(Rj, tmp3a, accel)
            m3tv(&mR[9 * jj], &wb[3 * b], tmp3b)
            r = 6 * jj
            for c in range(3):
                hvec[r + c] = accel[c]
                hvec[r + 3 + c] = tmp3b[c]
            # accel rows
            m3t_mul_3n(Rj, jmat(Js, 0, 3, n), scratch, n)
            skew3(accel, nx)
            m3_mul_3n(nx, jmat(Js, 0, 4, n), scratch + 3 * n, n)
            for c in range(3):
                for col in range(n):
                    H[(r + c) * s3 + col] = scratch[c * n + col] + scratch[3 * n + c * n + col]
            m3t_mul_3n(Rj, jmat(Js, 0, 2, n), scratch, n)
            for c in range(3):
                for col in range(n):
                    H[(r + c) * s3 + n + col] = scratch[c * n + col]
            m3t_mul_3n(Rj, jmat(Js, 0, 0, n), scratch, n)
            for c in range(3):
                for col in range(n):
                    H[(r + c) * s3 + 2 * n + col] = scratch[c * n + col]
            # gyro rows (d/dqdd block stays zero)
            avq = jmat(Js, 0, 5, n)
            avqd = jmat(Js, 0, 4, n)
            for c in range(3):
                for col in range(n):
                    H[(r + 3 + c) * s3 + col] = avq[c * n + col]
                    H[(r + 3 + c) * s3 + n + col] = avqd[c * n + col]

        # --- innovation and its covariance
        for i in range(m6):
            dy[i] = Y[k * m6 + i] - hvec[i]
        for i in range(m6):
            for j in range(s3):
                acc = 0.0
                for c in range(s3):
                    acc += H[i * s3 + c] * Pp[c * s3 + j]
                HP[i * s3 + j] = acc
        for i in range(m6):
            for j in range(m6):
                acc = 0.0
                for c in range(s3):
                    acc += HP[i * s3 + c] * H[j * s3 + c]
                W[i * m6 + j] = acc
            W[i * m6 + i] += qv[i]
        # --- in-place lower Cholesky of W
        logdet = 0.0
        diag_min = 0.0
        diag_max = 0.0
        for j in range(m6):
            acc = W[j * m6 + j]
            for c in range(j):
                acc -= W[j * m6 + c] * W[j * m6 + c]
            if acc <= 0.0:
                return k + 1
            dval = sqrt(acc)
            W[j * m6 + j] = dval
            logdet += 2.0 * log(dval)
            if j == 0:
                diag_min = dval
                diag_max = dval
            else:
                if dval < diag_min:
                    diag_min = dval
                if dval > diag_max:
                    diag_max = dval
            for i in range(j + 1, m6):
                acc = W[i * m6 + j]
                for c in range(j):
                    acc -= W[i * m6 + c] * W[j * m6 + c]
                W[i * m6 + j] = acc / dval
        if (diag_max / diag_min) * (diag_max / diag_min) > COND_LIMIT:
            return k + 1
        # --- gain K = (W^-1 (H Pp))^T via two triangular solves on HP
        for j in range(s3):
            for i in range(m6):
                acc = HP[i * s3 + j]
                for c in range(i):
                    acc -= W[i * m6 + c] * HP[c * s3 + j]
                HP[i * s3 + j] = acc / W[i * m6 + i]
            for i in range(m6 - 1, -1, -1):
                acc = HP[i * s3 + j]
                for c in range(i + 1, m6):
                    acc -= W[c * m6 + i] * HP[c * s3 + j]
                HP[i * s3 + j] = acc / W[i * m6 + i]
        for i in range(s3):
            for j in range(m6):
                Kg[i * m6 + j] = HP[j * s3 + i]
        # --- quadratic form dy^T W^-1 dy
        for i in range(m6):
            acc = dy[i]
            for c in range(i):
                acc -= W[i * m6 + c] * u[c]
            u[i] = acc / W[i * m6 + i]
        quad = 0.0
        for i in range(m6 - 1, -1, -1):
            acc = u[i]
            for c in range(i + 1, m6):
                acc -= W[c * m6 + i] * u[c]
            u[i] = acc / W[i * m6 + i]
        for i in range(m6):
            quad += dy[i] * u[i]
        # --- state update
        for i in range(s3):
            acc = xp[i]
            for c in range(m6):
                acc += Kg[i * m6 + c] * dy[c]
            x[i] = acc
        # --- covariance update: T1 = I - K H
        for i in range(s3):
            for j in range(s3):
                acc = 0.0
                for c in range(m6):
                    acc += Kg[i * m6 + c] * H[c * s3 + j]
                T1[i * s3 + j] = (1.0 if i == j else 0.0) - acc
        if joseph:
            for i in range(s3):
                for j in range(s3):
                    acc = 0.0
                    for c in range(s3):
                        acc += T1[i * s3 + c] * Pp[c * s3 + j]
                    T2[i * s3 + j] = acc
            for i in range(s3):
                for j in range(s3):
                    acc = 0.0
                    for c in range(s3):
                        acc += T2[i * s3 + c] * T1[j * s3 + c]
                    for c in range(m6):
                        acc += Kg[i * m6 + c] * qv[c] * Kg[j * m6 + c]
                    P[i * s3 + j] = acc
        else:
            for i in range(s3):
                for j in range(s3):
                    acc = 0.0
                    for c in range(s3):
                        acc += T1[i * s3 + c] * Pp[c * s3 + j]
                    P[i * s3 + j] = acc
        for i in range(s3):
            for j in range(i + 1, s3):
                acc = 0.5 * (P[i * s3 + j] + P[j * s3 + i])
                P[i * s3 + j] = acc
                P[j * s3 + i] = acc

        out_s[0] += logdet + quad
        if records != NULL:
            records[2 * k] = logdet
            records[2 * k + 1] = quad
        if xhat_out != NULL:
            for i in range(s3):
                xhat_out[k * s3 + i] = x[i]
    return 0


def _run_pass(ctx, theta, t, y, x0, P0, double t0, records, xhat_out, joseph):
    (axes, offsets, base_R, base_w, base_wd, base_a,
     mount_body, mount_R, mount_r, gravity, qv_diag, q_eps) = ctx
    cdef int n = axes.shape[0]
    cdef int M = mount_body.shape[0]
    theta_arr = np.ascontiguousarray(theta, dtype=np.float64)
    rho = offsets.copy()
    if n > 1:
        rho[1:] += theta_arr.reshape(n - 1, 3)
    t_arr = np.ascontiguousarray(t, dtype=np.float64)
    y_arr = np.ascontiguousarray(np.atleast_2d(np.asarray(y, dtype=np.float64)))
    cdef int K = t_arr.shape[0]
    if K == 0:
        return 0.0
    if y_arr.shape[0] != K or y_arr.shape[1] != 6 * M:
        raise ValueError("measurement array must be (K, 6M)")
    x_arr = np.array(x0, dtype=np.float64).ravel().copy()
    P_arr = np.ascontiguousarray(np.array(P0, dtype=np.float64))
    cdef int s3 = 3 * n
    cdef int m6 = 6 * M
    if x_arr.shape[0] != s3 or P_arr.shape != (s3, s3):
        raise ValueError("x0 / P0 dimensions do not match the chain")
    ws = np.empty((5, s3, s3))  # F, Qw, Pp, T1, T2
    Rb_arr = np.empty((n + 1, 9))
    wb_arr = np.empty((n + 1, 3))
    wdb_arr = np.empty((n + 1, 3))
    ab_arr = np.empty((n + 1, 3))
    J_arr = np.empty(((n + 1) * 8 * 3) * n)
    Js_arr = np.empty((8 * 3) * n)
    scratch = np.empty(2 * 3 * n)
    H_arr = np.empty((m6, s3))
    hvec = np.empty(m6)
    dy_arr = np.empty(m6)
    HP_arr = np.empty((m6, s3))
    W_arr = np.empty((m6, m6))
    Kg_arr = np.empty((s3, m6))
    u_arr = np.empty(m6)
    xp_arr = np.empty(s3)
    s_out = np.zeros(1)

    cdef double[:, ::1] axes_mv = axes
    cdef double[:, ::1] rho_mv = rho
    cdef double[:, ::1] baseR_mv = base_R
    cdef double[::1] basew_mv = base_w
    cdef double[::1] basewd_mv = base_wd
    cdef double[::1] basea_mv = base_a
    cdef int64_t[::1] mbody_mv = mount_body
    cdef double[:, :, ::1] mR_mv = mount_R
    cdef double[:, ::1] mr_mv = mount_r
    cdef double[::1] grav_mv = gravity
    cdef double[::1] qv_mv = qv_diag
    cdef double[::1] qeps_mv = q_eps
    cdef double[::1] tg_mv = t_arr
    cdef double[:, ::1] ymat_mv = y_arr
    cdef double[::1] xvec_mv = x_arr
    cdef double[:, ::1] Pmat_mv = P_arr
    cdef double[:, :, ::1] ws_mv = ws
    cdef double[:, ::1] RbM = Rb_arr
    cdef double[:, ::1] wbM = wb_arr
    cdef double[:, ::1] wdbM = wdb_arr
    cdef double[:, ::1] abM = ab_arr
    cdef double[::1] J_mv = J_arr
    cdef double[::1] Js_mv = Js_arr
    cdef double[::1] scr_mv = scratch
    cdef double[:, ::1] H_mv = H_arr
    cdef double[::1] hv_mv = hvec
    cdef double[::1] dyv_mv = dy_arr
    cdef double[:, ::1] HP_mv = HP_arr
    cdef double[:, ::1] W_mv = W_arr
    cdef double[:, ::1] Kg_mv = Kg_arr
    cdef double[::1] uv_mv = u_arr
    cdef double[::1] xpv_mv = xp_arr
    cdef double[::1] sv_mv = s_out
    cdef double[:, ::1] rec_mv
    cdef double[:, ::1] xh_mv
    cdef double* rec_ptr = NULL
    cdef double* xh_ptr = NULL
    if records is not None:
        rec_mv = records
        rec_ptr = &rec_mv[0, 0]
    if xhat_out is not None:
        xh_mv = xhat_out
        xh_ptr = &xh_mv[0, 0]
    cdef int joseph_c = 1 if joseph else 0
    cdef int status
    with nogil:
        status = pass_core(
            n, M, K, joseph_c,
            &axes_mv[0, 0], &rho_mv[0, 0],
            &baseR_mv[0, 0], &basew_mv[0], &basewd_mv[0], &basea_mv[0],
            &mbody_mv[0], &mR_mv[0, 0, 0], &mr_mv[0, 0],
            &grav_mv[0], &qv_mv[0], &qeps_mv[0],
            &tg_mv[0], &ymat_mv[0, 0], t0,
            &xvec_mv[0], &Pmat_mv[0, 0],
            &xpv_mv[0], &ws_mv[0, 0, 0], &ws_mv[1, 0, 0], &ws_mv[2, 0, 0],
            &ws_mv[3, 0, 0], &ws_mv[4, 0, 0],
            &RbM[0, 0], &wbM[0, 0], &wdbM[0, 0], &abM[0, 0],
            &J_mv[0], &Js_mv[0], &scr_mv[0],
            &H_mv[0, 0], &hv_mv[0], &dyv_mv[0], &HP_mv[0, 0], &W_mv[0, 0],
            &Kg_mv[0, 0], &uv_mv[0],
            &sv_mv[0], rec_ptr, xh_ptr,
        )
    if status > 0:
        raise KernelNumericalError(f"innovation covariance not SPD at step {status}")
    if status < 0:
        raise ValueError(f"non-increasing timestamp at step {-status}")
    return float(s_out[0])


def make_filter_pass(
    axes, offsets, base_R, base_w, base_wd, base_a,
    mount_body, mount_R, mount_r, gravity, qv_diag, q_eps,
):
    """Bind the chain/noise arrays and return the batch pass callable."""
    ctx = (
        np.ascontiguousarray(axes, dtype=np.float64),
        np.ascontiguousarray(offsets, dtype=np.float64),
        np.ascontiguousarray(base_R, dtype=np.float64),
        np.ascontiguousarray(base_w, dtype=np.float64),
        np.ascontiguousarray(base_wd, dtype=np.float64),
        np.ascontiguousarray(base_a, dtype=np.float64),
        np.ascontiguousarray(mount_body, dtype=np.int64),
        np.ascontiguousarray(mount_R, dtype=np.float64),
        np.ascontiguousarray(mount_r, dtype=np.float64),
        np.ascontiguousarray(gravity, dtype=np.float64),
        np.ascontiguousarray(qv_diag, dtype=np.float64),
        np.ascontiguousarray(q_eps, dtype=np.float64),
    )
    n = ctx[0].shape[0]
    if ctx[1].shape[0] != n or ctx[11].shape[0] != n:
        raise ValueError("offsets and q_eps must match the joint count")
    if ctx[10].shape[0] != 6 * ctx[6].shape[0]:
        raise ValueError("qv_diag must have length 6M")

    def pass_fn(theta, t, y, x0, P0, t0=0.0, records=None, xhat_out=None, joseph=True):
        return _run_pass(ctx, theta, t, y, x0, P0, t0, records, xhat_out, joseph)

    return pass_fn
