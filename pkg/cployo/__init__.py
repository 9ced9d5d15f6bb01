"""
cployo
~~~~~~

Project package: runtime settings, logging configuration and the error
hierarchy shared by every app of the nodule detection stack.
"""
