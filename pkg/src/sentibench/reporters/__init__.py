from .console import ConsoleReporter
from .html import HTMLReporter
__all__=['ConsoleReporter','HTMLReporter']
