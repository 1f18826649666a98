#!/usr/bin/env python3
"""
Plot Script Generator

Renders gnuplot scripts for a directory written by the reproduce command.
One script per horizon plots states and controls, the adjoint and, when
present, the 3-d state orbit; a last script overlays the distance profiles.

Usage:
    python scripts/generate_plot_scripts.py out/msd [--terminal pngcairo] [--output-dir plots]
"""

import argparse
import csv
import json
import re
import sys
from pathlib import Path
from typing import Any, Dict, List

try:
    from jinja2 import Template
except ImportError as e:
    print(f"Missing required dependency: {e}")
    print("Install with: pip install jinja2")
    sys.exit(1)

HORIZON_PATTERN = re.compile(r"trajectory_T(?P<label>[^/]+)\.csv$")

HORIZON_TEMPLATE = Template("""# generated by scripts/generate_plot_scripts.py, horizon T = {{ label }}
set terminal {{ terminal }} size 1200,800
set output '{{ output_dir }}/horizon_T{{ label }}.{{ extension }}'
set multiplot layout 2,1 title "{{ example }}: T = {{ label }}"
set xlabel 't'
set grid

set ylabel 'states / controls'
plot {% for column in state_columns %}'{{ data_dir }}/plot_states_T{{ label }}.dat' using 1:{{ column.index }} with lines title '{{ column.name }}'{% if not loop.last %}, \\
     {% endif %}{% endfor %}

set ylabel 'adjoint'
plot {% for column in adjoint_columns %}'{{ data_dir }}/plot_adjoint_T{{ label }}.dat' using 1:{{ column.index }} with lines title '{{ column.name }}'{% if not loop.last %}, \\
     {% endif %}{% endfor %}
unset multiplot
{% if orbit %}
set output '{{ output_dir }}/orbit_T{{ label }}.{{ extension }}'
set title "{{ example }}: state orbit, T = {{ label }}"
set xlabel 'x1'
set ylabel 'x2'
set zlabel 'x3'
splot '{{ data_dir }}/plot_orbit_T{{ label }}.dat' using 1:2:3 with lines title 'x(t)'
{% endif %}
""")

PROFILE_TEMPLATE = Template("""# generated by scripts/generate_plot_scripts.py
set terminal {{ terminal }} size 1200,600
set output '{{ output_dir }}/profiles.{{ extension }}'
set title "{{ example }}: distance to the turnpike subspace"
set xlabel 't'
set ylabel 'dist'
set logscale y
set datafile separator ','
set grid
plot {% for label in labels %}'{{ data_dir }}/profile_T{{ label }}.csv' using 1:2 skip 1 with lines title 'T = {{ label }}'{% if not loop.last %}, \\
     {% endif %}{% endfor %}
""")

EXTENSIONS = {"pngcairo": "png", "png": "png", "pdfcairo": "pdf", "svg": "svg"}


class PlotScriptGenerator:
    """Builds gnuplot scripts from the data files of one reproduction."""

    def __init__(self, data_dir: str, output_dir: str = "plots", terminal: str = "pngcairo"):
        self.data_dir = Path(data_dir)
        self.output_dir = Path(output_dir)
        self.terminal = terminal
        self.extension = EXTENSIONS.get(terminal, terminal)

    def horizon_labels(self) -> List[str]:
        labels = []
        for path in self.data_dir.glob("trajectory_T*.csv"):
            match = HORIZON_PATTERN.search(path.name)
            if match:
                labels.append(match.group("label"))
        return sorted(labels, key=float)

    def columns(self, label: str) -> Dict[str, List[str]]:
        """Column names of the trajectory table, grouped by prefix"""
        with open(self.data_dir / f"trajectory_T{label}.csv", newline="") as handle:
            header = next(csv.reader(handle))
        groups: Dict[str, List[str]] = {"x": [], "u": [], "lambda": []}
        for name in header:
            for prefix in ("lambda", "x", "u"):
                if name.startswith(prefix) and name[len(prefix):].isdigit():
                    groups[prefix].append(name)
                    break
        return groups

    def _example_name(self) -> str:
        facts = self.data_dir / "example.json"
        if facts.exists():
            return json.loads(facts.read_text()).get("example", self.data_dir.name)
        return self.data_dir.name

    def render_horizon(self, label: str, example: str) -> str:
        groups = self.columns(label)
        state_names = groups["x"] + groups["u"]
        context: Dict[str, Any] = {
            "label": label,
            "example": example,
            "terminal": self.terminal,
            "extension": self.extension,
            "data_dir": self.data_dir,
            "output_dir": self.output_dir,
            "state_columns": [{"index": i + 2, "name": name} for i, name in enumerate(state_names)],
            "adjoint_columns": [{"index": i + 2, "name": name} for i, name in enumerate(groups["lambda"])],
            "orbit": (self.data_dir / f"plot_orbit_T{label}.dat").exists(),
        }
        return HORIZON_TEMPLATE.render(**context)

    def render_profiles(self, labels: List[str], example: str) -> str:
        return PROFILE_TEMPLATE.render(
            labels=labels,
            example=example,
            terminal=self.terminal,
            extension=self.extension,
            data_dir=self.data_dir,
            output_dir=self.output_dir,
        )

    def generate(self) -> List[Path]:
        labels = self.horizon_labels()
        if not labels:
            print(f"❌ No trajectory_T*.csv files in {self.data_dir}")
            print("   Run a reproduction first: python -m phturnpike.main reproduce msd --out out/msd")
            sys.exit(1)
        example = self._example_name()
        written = []
        for label in labels:
            path = self.data_dir / f"plot_T{label}.gp"
            path.write_text(self.render_horizon(label, example))
            written.append(path)
            print(f"✅ {path}")
        path = self.data_dir / "plot_profiles.gp"
        path.write_text(self.render_profiles(labels, example))
        written.append(path)
        print(f"✅ {path}")
        return written


def main():
    parser = argparse.ArgumentParser(description="Generate gnuplot scripts for a reproduction directory")
    parser.add_argument("data_dir", help="Directory written by the reproduce command")
    parser.add_argument("--output-dir", default="plots", help="Where gnuplot writes the images")
    parser.add_argument("--terminal", default="pngcairo", help="gnuplot terminal")

    args = parser.parse_args()

    print("🚀 Generating gnuplot scripts...")
    print(f"   Data: {args.data_dir}")
    print(f"   Images: {args.output_dir}")
    print()

    scripts = PlotScriptGenerator(args.data_dir, args.output_dir, args.terminal).generate()

    print(f"\n🎉 Wrote {len(scripts)} scripts")
    print(f"   Render with: mkdir -p {args.output_dir} && gnuplot {args.data_dir}/*.gp")


if __name__ == "__main__":
    main()
