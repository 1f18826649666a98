import typer

from phturnpike.cli.commands import analyze_control, analyze_pencil, reduce, reproduce, solve, turnpike, validate


def register_commands(app: typer.Typer) -> None:
    app.command("validate")(validate.validate)
    app.command("analyze-pencil")(analyze_pencil.analyze_pencil)
    app.command("analyze-control")(analyze_control.analyze_control)
    app.command("reduce")(reduce.reduce)
    app.command("solve")(solve.solve)
    app.command("turnpike")(turnpike.turnpike)
    app.command("reproduce")(reproduce.reproduce)
