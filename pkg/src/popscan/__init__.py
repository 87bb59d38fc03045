"""Pop-up discovery and sneaky-pattern labelling for Android apps.

The pipeline explores an app (real device over ADB or a scripted
simulator), detects modal pop-ups from the screenshot, dismisses them,
and labels each with a type and any manipulative design patterns.
"""

__version__ = "0.1.0"
