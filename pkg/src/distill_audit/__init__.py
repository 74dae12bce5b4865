"""Knowledge-distillation audit toolkit.

Trains teacher, student and control models under shared seeds, measures
teacher-student functional similarity, and tests whether distillation moved
the student toward the teacher beyond what the controls explain.
"""

__version__ = "0.1.0"
