"""discom: distributed spreadsheet composition platform.

Participants export versioned cell ranges to a central service and import
other participants' exports into their own workbooks; the service hosts
uploaded intermediate workbooks and recalculates them itself, so multi-hop
spreadsheet chains stay current even while their owners are offline.
"""

__version__ = "0.1.0"
