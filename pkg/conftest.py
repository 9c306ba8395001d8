# Reference material is not part of the test suite.
collect_ignore = ["examples"]
