"""Skeleton remapping from detector-native joint orders to the 17-joint topology.

The target order matches ``auglift.skeleton.JOINT_NAMES_17`` (pelvis-rooted).
COCO-style detectors do not predict pelvis/spine/thorax directly, so those
joints are synthesized from hip/shoulder midpoints; the mapping used is
recorded verbatim in the adapter manifest.
"""

from __future__ import annotations

import numpy as np

COCO17_NAMES = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
)

# direct copies: target joint name -> COCO source index
_DIRECT = {
    "right_hip": 12,
    "right_knee": 14,
    "right_ankle": 16,
    "left_hip": 11,
    "left_knee": 13,
    "left_ankle": 15,
    "left_shoulder": 5,
    "left_elbow": 7,
    "left_wrist": 9,
    "right_shoulder": 6,
    "right_elbow": 8,
    "right_wrist": 10,
    "neck": 0,  # nose stands in for the neck/nose joint
}

MAPPING_DESCRIPTION = (
    "coco17->h36m17: limbs copied; pelvis=mid(hips); thorax=mid(shoulders); "
    "spine=mid(pelvis,thorax); neck=nose; head=mid(eyes); confidence of a "
    "synthesized joint is the min over its sources"
)


def map_coco17_to_topology(keypoints: np.ndarray, scores: np.ndarray):
    """(17, 2) COCO keypoints + (17,) scores -> topology-ordered (17, 2), (17,).

    Synthesized joints average their source positions and take the minimum
    source confidence.
    """
    kp = np.asarray(keypoints, dtype=np.float64)
    sc = np.asarray(scores, dtype=np.float64)
    if kp.shape != (17, 2) or sc.shape != (17,):
        raise ValueError("expected (17, 2) keypoints and (17,) scores in COCO order")

    def mid(i, j):
        return 0.5 * (kp[i] + kp[j]), min(sc[i], sc[j])

    out_xy = np.zeros((17, 2))
    out_c = np.zeros(17)

    pelvis_xy, pelvis_c = mid(11, 12)
    thorax_xy, thorax_c = mid(5, 6)
    head_xy, head_c = mid(1, 2)

    from auglift.skeleton import JOINT_NAMES_17

    for t, name in enumerate(JOINT_NAMES_17):
        if name in _DIRECT:
            s = _DIRECT[name]
            out_xy[t], out_c[t] = kp[s], sc[s]
        elif name == "pelvis":
            out_xy[t], out_c[t] = pelvis_xy, pelvis_c
        elif name == "thorax":
            out_xy[t], out_c[t] = thorax_xy, thorax_c
        elif name == "spine":
            out_xy[t] = 0.5 * (pelvis_xy + thorax_xy)
            out_c[t] = min(pelvis_c, thorax_c)
        elif name == "head":
            out_xy[t], out_c[t] = head_xy, head_c
        else:  # pragma: no cover
            raise KeyError(name)
    return out_xy, np.clip(out_c, 0.0, 1.0)
