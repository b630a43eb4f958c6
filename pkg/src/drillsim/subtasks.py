"""Subtask labels shared by the controller, classifier and simulator."""

from enum import IntEnum


class Subtask(IntEnum):
    """Phase of the collaborative drilling task."""

    IDLE = 1
    DRIVING = 2
    CONTACT = 3


N_SUBTASKS = 3
