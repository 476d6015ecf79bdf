# Mark src as a package so modules can be imported during tests.
