import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from playertrack.geometry import CameraModel
from playertrack.poseprior import (COCO_JOINTS, ENTROPY_THRESHOLD, L_MAX, L_MIN, Heatmap3D,
                                   Pose3D, SkeletonDef, bone_lengths, canonical_pose, entropy,
                                   gate, l2d, l3d, normalize, person_uncertainty, pose_l1,
                                   prior_grad, prior_losses, project_pose, soft_argmax,
                                   unsup_loss)

J = {n: i for i, n in enumerate(COCO_JOINTS)}
SKEL = SkeletonDef()


def one_hot(idx, res=8):
    h = Heatmap3D.zeros(res)
    h.values[idx] = 1.0
    return h


def rotation(axis, theta):
    axis = np.asarray(axis, float) / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(theta) * k + (1 - math.cos(theta)) * k @ k


def finite_difference(pose, h=1e-6):
    joints = pose.joints
    out = np.zeros_like(joints)
    for j in range(joints.shape[0]):
        for c in range(3):
            up, dn = joints.copy(), joints.copy()
            up[j, c] += h
            dn[j, c] -= h
            out[j, c] = (prior_losses(up).prior - prior_losses(dn).prior) / (2 * h)
    return out


def kink_distance(pose) -> float:
    """How close the pose is to any non-differentiable point of the prior."""
    lengths = bone_lengths(pose, SKEL)
    d = [np.min(np.abs(lengths - L_MAX)), np.min(np.abs(lengths - L_MIN))]
    # neck and midhip are midpoints, so the clavicle and hip-link pairs are equal
    # by construction and their differences are identically zero (smooth)
    d += [abs(lengths[i] - lengths[j]) for i, j in SKEL.symmetric_pairs
          if (i, j) not in ((3, 4), (10, 11))]
    nodes = SKEL.nodes(pose.joints)
    neck, hip, ls = (SKEL.node(nodes, n) for n in ("neck", "midhip", "left_shoulder"))
    unit = lambda v: v / np.linalg.norm(v)
    fwd = np.cross(unit(hip - neck), unit(ls - neck))
    dirs = [unit(SKEL.node(nodes, "nose") - neck)]
    for side in ("left", "right"):
        mid = 0.5 * (SKEL.node(nodes, f"{side}_hip") + SKEL.node(nodes, f"{side}_ankle"))
        dirs.append(unit(mid - SKEL.node(nodes, f"{side}_knee")))
    for v in dirs:
        dot = fwd @ v
        d += [abs(dot), abs(dot - 1.0)]
    return float(min(d))


# -- heatmaps -----------------------------------------------------------------------

def test_normalize_examples():
    h = one_hot((1, 2, 3))
    assert np.array_equal(normalize(h).values, h.values)
    u = normalize(Heatmap3D(np.ones((4, 4, 4))))
    assert np.allclose(u.values, 1 / 64)
    two = Heatmap3D(np.zeros((4, 4, 4)))
    two.values[0, 0, 0] = two.values[3, 3, 3] = 2.0
    assert normalize(two).values.max() == 0.5
    with pytest.raises(ValueError):
        normalize(Heatmap3D(np.zeros((2, 2, 2))))


def test_soft_argmax_examples():
    h = one_hot((1, 5, 7))
    assert np.allclose(soft_argmax(h), h.voxel_center((1, 5, 7)), atol=1e-15)
    h.values[1, 5, 7] = 0.5
    h.values[3, 1, 7] = 0.5
    mid = 0.5 * (h.voxel_center((1, 5, 7)) + h.voxel_center((3, 1, 7)))
    assert np.allclose(soft_argmax(h), mid)
    with pytest.raises(ValueError):
        soft_argmax(Heatmap3D(np.ones((2, 2, 2))))


def test_soft_argmax_gaussian_blob_sub_voxel():
    h = Heatmap3D.zeros(64)
    centre = np.array([0.1234, -0.2071, 0.05013])
    grid = np.arange(64) * h.pitch
    axes = [h.origin[a] + grid for a in range(3)]
    sigma = 2 * h.pitch
    g = [np.exp(-0.5 * ((ax - c) / sigma) ** 2) for ax, c in zip(axes, centre)]
    h = normalize(Heatmap3D(g[0][:, None, None] * g[1][None, :, None] * g[2][None, None, :],
                            h.origin, h.pitch))
    assert np.max(np.abs(soft_argmax(h) - centre)) < 0.25 * h.pitch


def test_soft_argmax_translation_equivariant():
    rng = np.random.default_rng(0)
    h = normalize(Heatmap3D(rng.uniform(size=(5, 6, 7)), origin=[0.0, 0.0, 0.0], pitch=0.1))
    shifted = Heatmap3D(h.values, h.origin + [1.0, -2.0, 0.5], h.pitch)
    assert np.allclose(soft_argmax(shifted) - soft_argmax(h), [1.0, -2.0, 0.5])


def test_entropy_examples():
    assert entropy(one_hot((0, 0, 0))) == 0.0
    uni = normalize(Heatmap3D(np.ones((64, 64, 64))))
    assert entropy(uni) == pytest.approx(math.log(262144), abs=1e-9)
    assert entropy(uni) == pytest.approx(12.4766, abs=1e-4)
    two = Heatmap3D(np.zeros((4, 4, 4)))
    two.values[0, 0, 0] = two.values[1, 2, 3] = 0.5
    assert entropy(two) == pytest.approx(math.log(2), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_entropy_permutation_invariant_and_bounded(seed):
    rng = np.random.default_rng(seed)
    v = rng.uniform(size=(3, 4, 5)) * (rng.uniform(size=(3, 4, 5)) > 0.3)
    v[0, 0, 0] += 0.1
    h = normalize(Heatmap3D(v))
    perm = normalize(Heatmap3D(rng.permutation(v.ravel()).reshape(3, 4, 5)))
    assert entropy(h) == pytest.approx(entropy(perm), abs=1e-12)
    assert 0.0 <= entropy(h) <= math.log(60) + 1e-12


def test_uncertainty_and_gate():
    sharp = [one_hot((i, 0, 0)) for i in range(3)]
    assert person_uncertainty(sharp) == 0.0 and gate(0.0, ENTROPY_THRESHOLD)
    uni = normalize(Heatmap3D(np.ones((64, 64, 64))))
    u = person_uncertainty(sharp + [uni])
    assert u == pytest.approx(12.4766, abs=1e-4) and not gate(u, 6.0)
    assert not gate(6.0, 6.0)
    with pytest.raises(ValueError):
        person_uncertainty([])


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 20), st.floats(0, 20), st.floats(0, 5))
def test_gate_monotone_in_threshold(u, lam, extra):
    if gate(u, lam):
        assert gate(u, lam + extra)


def test_from_logits_is_softmax():
    h = Heatmap3D.from_logits(np.log(np.arange(1, 9, dtype=float)).reshape(2, 2, 2), [0, 0, 0], 1.0)
    assert np.allclose(h.values.ravel(), np.arange(1, 9) / 36)


# -- pose losses -----------------------------------------------------------------------

def test_pose_l1_examples():
    p = canonical_pose()
    assert pose_l1(p, p) == 0.0
    q = p.joints.copy()
    q[0] += [0.1, 0, 0]
    assert pose_l1(q, p) == pytest.approx(0.1)
    q = p.joints.copy()
    q[0] += [0.1, 0.2, 0.3]
    q[5] += [-0.1, 0, 0]
    assert pose_l1(q, p) == pytest.approx(0.7)
    assert l3d(q, p) == pose_l1(q, p)
    with pytest.raises(ValueError):
        pose_l1(np.zeros((3, 3)), np.zeros((4, 3)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_translation_invariances(seed, shift):
    rng = np.random.default_rng(seed)
    a = canonical_pose().joints + rng.normal(0, 0.05, (17, 3))
    b = canonical_pose().joints + rng.normal(0, 0.05, (17, 3))
    assert pose_l1(a + shift, b + shift) == pytest.approx(pose_l1(a, b), abs=1e-9)
    la, lb = prior_losses(a), prior_losses(a + shift)
    assert lb.length == pytest.approx(la.length, abs=1e-9)
    assert lb.symm == pytest.approx(la.symm, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-np.pi, np.pi))
def test_angle_loss_rotation_invariant(seed, theta):
    rng = np.random.default_rng(seed)
    a = canonical_pose().joints + rng.normal(0, 0.1, (17, 3))
    rot = rotation(rng.normal(size=3), theta)
    assert prior_losses(a @ rot.T).angle == pytest.approx(prior_losses(a).angle, abs=1e-9)


def test_project_pose_examples():
    cam = CameraModel(100.0, 100.0, 320.0, 240.0)
    pix, valid = project_pose(np.array([[0, 0, 5.0], [1, 0, 5.0], [0, 0, -1.0]]), cam)
    assert np.allclose(pix[:2], [[320, 240], [340, 240]])
    assert valid.tolist() == [True, True, False]


def test_l2d_examples():
    cam = CameraModel(100.0, 100.0, 320.0, 240.0)
    pose = np.array([[0, 0, 5.0], [1, 0, 5.0]])
    pix, _ = project_pose(pose, cam)
    assert l2d(pose, [pix], [cam]) == 0.0
    off = pix.copy()
    off[1] += [3, 4]
    assert l2d(pose, [off], [cam]) == pytest.approx(5.0)


def test_l2d_two_views_against_scalar_sum():
    cams = [CameraModel(100.0, 120.0, 320.0, 240.0),
            CameraModel(80.0, 80.0, 300.0, 200.0, rotation(np.array([0, 1.0, 0]), 0.2), [0.5, 0, 1])]
    pose = np.array([[0.1, 0.2, 5.0], [1.0, -0.3, 6.0], [-0.4, 0.0, 4.0]])
    offsets = [np.array([[1, 2], [0, 0], [-3, 1]]), np.array([[0, 5], [2, 2], [1, 0]])]
    labels = []
    for cam, o in zip(cams, offsets):
        pix, _ = project_pose(pose, cam)
        labels.append(pix + o)
    expect = 0.0
    for o in offsets:
        for row in o:
            expect += math.sqrt(row[0] ** 2 + row[1] ** 2)
    assert l2d(pose, labels, cams) == pytest.approx(expect, abs=1e-9)


def test_l2d_skips_joints_behind_camera():
    cam = CameraModel(100.0, 100.0, 320.0, 240.0)
    pose = np.array([[0, 0, 5.0], [0, 0, -5.0]])
    assert l2d(pose, [[[320, 240], [0, 0]]], [cam]) == 0.0


def test_unsup_loss_examples():
    assert unsup_loss(0, 0, 0, True) == 0.0
    assert unsup_loss(1, 1, 1, True) == pytest.approx(11.02)
    assert unsup_loss(1, 1, 1, False) == pytest.approx(10.02)


# -- human prior --------------------------------------------------------------------------

def test_skeleton_shape():
    assert len(SKEL.bones) == 16 and len(SKEL.symmetric_pairs) == 6
    with pytest.raises(ValueError):
        SkeletonDef(bones=SKEL.bones + (("left_wrist", "nose"),))


def test_canonical_pose_has_zero_prior():
    losses = prior_losses(canonical_pose())
    assert tuple(losses) == (0.0, 0.0, 0.0, 0.0) and not losses.degenerate
    assert np.array_equal(prior_grad(canonical_pose()), np.zeros((17, 3)))


def test_overlong_bone_length_term():
    q = canonical_pose().joints.copy()
    q[J["left_ankle"]] = q[J["left_knee"]] - [0, 0, 0.8]
    assert prior_losses(q).length == pytest.approx(0.1, abs=1e-12)


def test_asymmetric_upper_arms():
    q = canonical_pose().joints.copy()
    q[J["right_elbow"]] += [0, 0, 0.05]
    q[J["right_wrist"]] += [0, 0, 0.05]
    lengths = bone_lengths(q, SKEL)
    assert lengths[5] == pytest.approx(0.30) and lengths[6] == pytest.approx(0.25)
    losses = prior_losses(q)
    assert losses.symm == pytest.approx(0.05, abs=1e-12)
    assert losses.prior == pytest.approx(0.05, abs=1e-12)


def test_overlong_ear_bone_gradient_along_axis():
    q = canonical_pose().joints.copy()
    q[J["left_ear"]] = q[J["nose"]] + [-0.8, 0.0, 0.0]
    grad = prior_grad(q)
    u = np.array([-1.0, 0.0, 0.0])
    assert np.allclose(grad[J["left_ear"]], u, atol=1e-12)
    assert np.allclose(grad[J["nose"]], -u, atol=1e-12)
    others = [i for i in range(17) if i not in (J["left_ear"], J["nose"])]
    assert np.allclose(grad[others], 0.0, atol=1e-12)


def test_nose_pointing_forward_is_penalised():
    q = canonical_pose().joints.copy()
    q[J["nose"]] = [0.0, 0.15, 1.6]
    losses = prior_losses(q)
    assert losses.head > 0 and losses.angle == pytest.approx(losses.head)
    # the sign flag mirrors which side of the body is penalised
    assert prior_losses(q, forward_sign=-1.0).head == 0.0


def test_collinear_spine_and_shoulder_is_flagged():
    q = canonical_pose().joints.copy()
    q[J["left_shoulder"]] = [0.0, 0.0, 1.8]
    q[J["right_shoulder"]] = [0.0, 0.0, 1.2]
    losses = prior_losses(q)
    assert losses.degenerate and losses.angle == 0.0


def test_zero_length_bone_gradient_raises():
    q = canonical_pose().joints.copy()
    q[J["left_knee"]] = q[J["left_hip"]]
    with pytest.raises(ValueError):
        prior_grad(q)


def test_gradient_matches_finite_differences_on_50_poses():
    rng = np.random.default_rng(7)
    base = canonical_pose().joints
    checked = 0
    worst = 0.0
    while checked < 50:
        pose = Pose3D(base * rng.uniform(0.6, 1.8) + rng.normal(0, 0.12, base.shape))
        if kink_distance(pose) < 1e-3 or prior_losses(pose).degenerate:
            continue
        worst = max(worst, float(np.max(np.abs(prior_grad(pose) - finite_difference(pose)))))
        checked += 1
    assert worst < 1e-5


def test_pose_validation():
    with pytest.raises(ValueError):
        Pose3D(np.full((17, 3), np.nan))
    with pytest.raises(ValueError):
        Pose3D(np.zeros((5, 3)))
