"""Wrench transport between tug grasp points and the shared measurement point.

A tug grips its link at a fixed body-frame offset from the measurement point.
The grasp map carries the wrench the tug exerts at the grasp point to the
equivalent wrench at the measurement point; the inverse map computes what the
tug must exert so a desired wrench appears at the measurement point. Both are
closed-form (the map is unimodular), so no linear solve is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spatial import skew


@dataclass(frozen=True)
class GraspMap:
    """Link attitude plus the grasp-point offset (link frame, from the measurement point)."""

    rotation: np.ndarray
    offset: np.ndarray


def grasp_matrix(g: GraspMap) -> np.ndarray:
    """6x6 map taking a grasp-point wrench to the measurement-point wrench."""
    out = np.eye(6)
    out[3:, :3] = skew(g.rotation @ g.offset)
    return out


def apply_grasp(g: GraspMap, tug_wrench: np.ndarray) -> np.ndarray:
    """Wrench at the measurement point produced by a wrench at the grasp point."""
    f = tug_wrench[:3]
    arm = g.rotation @ g.offset
    out = np.empty(6)
    out[:3] = f
    out[3:] = tug_wrench[3:] + np.cross(arm, f)
    return out


def invert_grasp(g: GraspMap, link_wrench: np.ndarray) -> np.ndarray:
    """Wrench the tug must exert at the grasp point to realize link_wrench.

    Exact inverse of apply_grasp: the force is unchanged and the moment of the
    force about the grasp point is subtracted from the torque.
    """
    f = link_wrench[:3]
    arm = g.rotation @ g.offset
    out = np.empty(6)
    out[:3] = f
    out[3:] = link_wrench[3:] - np.cross(arm, f)
    return out
