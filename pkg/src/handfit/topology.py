"""Canonical 21-keypoint hand topology.

Keypoint order: wrist (0); five fingers as chains of three joints
(finger f occupies 1+3f, 2+3f, 3+3f); fingertips appended as 16+f.
This matches the model convention of skeleton joints followed by the five
fingertip mesh vertices.
"""

N_SKELETON_JOINTS = 16
N_KEYPOINTS = 21

FINGER_BASES = [1 + 3 * f for f in range(5)]


def hand_skeleton_edges() -> list[tuple[int, int]]:
    """Parent->child bone segments including fingertip links (20 edges)."""
    edges = []
    for f in range(5):
        base = 1 + 3 * f
        edges.append((0, base))
        edges.append((base, base + 1))
        edges.append((base + 1, base + 2))
        edges.append((base + 2, 16 + f))
    return edges


def palm_triangles() -> list[tuple[int, int, int]]:
    """Fan triangulation of the palm over the wrist and finger bases."""
    return [(0, FINGER_BASES[i], FINGER_BASES[i + 1]) for i in range(4)]


def skeleton_edges_from_parent(parent, tip_attachments=None) -> list[tuple[int, int]]:
    """Bone edges for an arbitrary joint tree.

    tip_attachments maps appended keypoint index -> the joint it hangs off
    (used for fingertip keypoints that are not skeleton joints).
    """
    edges = [(int(parent[j]), j) for j in range(1, len(parent))]
    if tip_attachments:
        edges.extend((int(j), int(t)) for t, j in tip_attachments.items())
    return edges
