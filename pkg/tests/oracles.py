"""Slow, independent reimplementations used as test oracles.

Nothing here imports the code paths under test: transforms, graph blocks,
layer norm, MLPs and losses are rewritten with explicit loops over indices.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# --------------------------------------------------------------------------
# forward pass


def dct_matrix(T):
    """D[j, k]: sample j -> coefficient k, for right-multiplication."""
    D = np.zeros((T, T))
    for j in range(T):
        for k in range(T):
            c = math.sqrt(1.0 / T) if k == 0 else math.sqrt(2.0 / T)
            D[j, k] = c * math.cos(math.pi * (2 * j + 1) * k / (2 * T))
    return D


def along_time(x, M):
    """Apply ``M`` to the trailing axis of every leading index."""
    out = np.zeros(x.shape[:-1] + (M.shape[1],))
    for idx in np.ndindex(*x.shape[:-1]):
        for k in range(M.shape[1]):
            out[idx + (k,)] = np.dot(x[idx], M[:, k])
    return out


def pad_last(x, T):
    t = x.shape[-1]
    out = np.zeros(x.shape[:-1] + (T,))
    for i in range(T):
        out[..., i] = x[..., min(i, t - 1)]
    return out


def graph_block(x, a_t, w, a_s):
    """[C, S, L] -> [D, S, L]: temporal mixing, channel map, spatial mixing."""
    C, S, L = x.shape
    D = w.shape[1]
    y = np.zeros((C, S, L))
    for c in range(C):
        for s in range(S):
            for i in range(L):
                y[c, s, i] = np.dot(x[c, s, :], a_t[:, i])
    z = np.zeros((L, S, D))
    for l in range(L):
        for s in range(S):
            for d in range(D):
                z[l, s, d] = np.dot(y[:, s, l], w[:, d])
    u = np.zeros((L, S, D))
    for l in range(L):
        for d in range(D):
            for s in range(S):
                u[l, s, d] = np.dot(a_s[s, :], z[l, :, d])
    return u.transpose(2, 1, 0)


def norm_rows(v, scale, shift, eps=1e-6):
    mu = sum(v) / len(v)
    var = sum((a - mu) ** 2 for a in v) / len(v)
    return np.array([(a - mu) / math.sqrt(var + eps) for a in v]) * scale + shift


def residual_stack(f, comps):
    if not comps:
        return f
    T = f.shape[-1]
    x = np.concatenate([f, f], axis=-1)
    for comp in comps:
        y = graph_block(x, comp.a_t.data, comp.w.data, comp.a_s.data)
        C, S, L = y.shape
        act = np.zeros_like(y)
        for s in range(S):
            for l in range(L):
                act[:, s, l] = np.tanh(norm_rows(y[:, s, l], comp.ln_scale.data, comp.ln_shift.data))
        x = x + act
    return x[..., :T]


def mlp_rows(rows, mlp):
    out = []
    for v in rows:
        h = v
        for i in (1, 2, 3):
            W, b = getattr(mlp, f"w{i}").data, getattr(mlp, f"b{i}").data
            h = np.array([np.dot(h, W[:, j]) + b[j] for j in range(W.shape[1])])
            h = np.tanh(norm_rows(h, getattr(mlp, f"ln{i}_scale").data, getattr(mlp, f"ln{i}_shift").data))
        out.append(h)
    return np.array(out)  # [T, 16]


def model_forward(params, pose, head, dynamic, static):
    """Eval-mode forecast for a single (unbatched) window."""
    cfg = params.config
    T, t, n = cfg.t_total, cfg.t_in, cfg.n_joints
    D = dct_matrix(T)
    p_pad = pad_last(pose, T)
    f = graph_block(along_time(p_pad, D), params.encoder.a_t.data, params.encoder.w_start.data,
                    params.encoder.a_s.data)
    f = residual_stack(f, params.pose_stack)
    nodes = [f]

    def stream(rows, mlp):
        g = mlp_rows(rows, mlp).T  # [16, T]
        return np.stack([g] * cfg.repeat_nodes, axis=1)

    if cfg.use_head:
        h = along_time(pad_last(head, T), D)  # [3, T]
        nodes.append(stream([h[:, i] for i in range(T)], params.head_mlp))
    for flag, boxes, mlp in ((cfg.use_dynamic, dynamic, params.dynamic_mlp),
                             (cfg.use_static, static, params.static_mlp)):
        if not flag or cfg.objects_per_category == 0:
            continue
        b = along_time(pad_last(boxes, T), D)  # [3, 8, k, T]
        k = b.shape[2]
        rows = []
        for i in range(T):
            v = np.zeros(24 * k)
            for o in range(k):
                for vert in range(8):
                    for c in range(3):
                        v[o * 24 + vert * 3 + c] = b[c, vert, o, i]
            rows.append(v)
        nodes.append(stream(rows, mlp))
    fused = np.concatenate(nodes, axis=1)
    g = residual_stack(fused, params.fuse_stack)
    y = graph_block(g, params.decoder.a_t.data, params.decoder.w_end.data, params.decoder.a_s.data)
    y = along_time(y, D.T)
    return (y[:, :n, :] + p_pad)[:, :, t:]


# --------------------------------------------------------------------------
# object selection


def angle(head_pos, head_dir, bbox):
    c = [sum(bbox[v][i] for v in range(8)) / 8 for i in range(3)]
    ray = [c[i] - head_pos[i] for i in range(3)]
    length = math.sqrt(sum(r * r for r in ray))
    if length < 1e-9:
        return 0.0
    cos = sum(head_dir[i] * ray[i] / length for i in range(3))
    return math.acos(min(1.0, max(-1.0, cos)))


def exhaustive_topk(objects, head_pos, head_dir, k):
    """Per category, the k-subset whose sorted (angle, id) list is smallest."""
    chosen = {}
    for cat in ("dynamic", "static"):
        pool = [(angle(head_pos, head_dir, o.bbox), o.id) for o in objects if o.category == cat]
        m = min(k, len(pool))
        best = min((sorted(combo) for combo in itertools.combinations(pool, m)), default=[])
        ids = [oid for _, oid in best]
        chosen[cat] = ids + [None] * (k - m)
    return chosen


# --------------------------------------------------------------------------
# losses, on [B, 3, n, F] arrays


def loop_motion_loss(pred, gt, squared=False):
    B, _, n, F = pred.shape
    acc = 0.0
    for b in range(B):
        for j in range(n):
            for f in range(F):
                d2 = sum((pred[b, c, j, f] - gt[b, c, j, f]) ** 2 for c in range(3))
                acc += d2 if squared else d2 / math.sqrt(d2 + 1e-12)
    return acc / (B * n * F)


def loop_velocity_loss(pred, gt, squared=False):
    B, _, n, F = pred.shape
    acc = 0.0
    for b in range(B):
        for j in range(n):
            for f in range(1, F):
                d2 = sum(((pred[b, c, j, f] - pred[b, c, j, f - 1]) - (gt[b, c, j, f] - gt[b, c, j, f - 1])) ** 2
                         for c in range(3))
                acc += d2 if squared else d2 / math.sqrt(d2 + 1e-12)
    return acc / (B * n * (F - 1))


def random_scene(rng, max_objects=7):
    """Objects around a random viewport, with deliberate exact ties and shortfalls.

    Exact ties come from duplicating a box under a new id, or, when the gaze
    runs along +x from a head with y = 0, from mirroring a box across y = 0.
    """
    from hoimotion.scene import SceneObject, ViewportState

    axis_aligned = rng.random() < 0.5
    head = rng.normal(size=3)
    if axis_aligned:
        head[1] = 0.0
        d = np.array([1.0, 0.0, 0.0])
    else:
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
    ids = [int(i) for i in rng.permutation(100)[: 2 * max_objects]]
    corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    objects = []
    for _ in range(int(rng.integers(0, max_objects + 1))):
        cat = "dynamic" if rng.random() < 0.5 else "static"
        c = head + rng.normal(size=3) * 2
        objects.append(SceneObject(ids.pop(), cat, c + corners * rng.uniform(0.05, 0.5, size=3) / 2))
        roll = rng.random()
        if roll < 0.2:
            objects.append(SceneObject(ids.pop(), cat, objects[-1].bbox.copy()))
        elif roll < 0.45 and axis_aligned:
            mirrored = objects[-1].bbox.copy()
            mirrored[:, 1] *= -1
            objects.append(SceneObject(ids.pop(), cat, mirrored))
    return objects, ViewportState(head, d)
