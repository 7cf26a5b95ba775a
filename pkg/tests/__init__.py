# Test suites for the tagrec toolkit
