"""Nox configuration."""

import nox                                       # pylint: disable=import-error


@nox.session(reuse_venv=True)
def tests(session):
    """Run the unit tests."""
    session.install('-e', '.[test]')
    session.run('pytest', *session.posargs)


@nox.session(reuse_venv=True)
def acceptance(session):
    """Run the slow, full size, acceptance tests."""
    session.install('-e', '.[test]')
    session.run('pytest', '--acceptance', *session.posargs)


@nox.session(reuse_venv=True)
def lint(session):
    """Check the code using ruff."""
    session.install('ruff')
    session.run('ruff', 'check', 'src', 'tests')


@nox.session(reuse_venv=True)
def release(session):
    """Generate a release."""
    session.install('build')
    session.run('python', '-m', 'build')
