import json
import math
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

FLOAT_DIGITS = 15


def _clean(value: Any) -> Any:
    """Plain JSON types with floats at a fixed precision."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.{FLOAT_DIGITS}g}")
    if isinstance(value, complex):
        return {"re": _clean(value.real), "im": _clean(value.imag)}
    return value


class ReportComponents:
    """Writers for JSON reports, CSV tables and HTML charts."""

    def render_json(self, report: Dict[str, Any]) -> str:
        return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"

    def write_json(self, report: Dict[str, Any], path: Optional[str]) -> str:
        """Write the report to path, or only return the text when path is None."""
        text = self.render_json(report)
        if path:
            Path(path).write_text(text)
        return text

    def write_csv(self, table: pd.DataFrame, path: str) -> None:
        table.to_csv(path, index=False, float_format="%.12g")

    def write_html(self, fig: go.Figure, path: str) -> None:
        fig.write_html(path, include_plotlyjs="cdn")

    def convergence_chart(self, table: pd.DataFrame) -> go.Figure:
        """Discrepancy against k on a log axis."""
        fig = px.line(
            table,
            x="k",
            y="discrepancy",
            title="Metric discrepancy against k",
            markers=True,
            log_x=True,
            color_discrete_sequence=['#3b82f6']
        )
        fig.update_layout(
            height=350,
            margin=dict(t=40, b=40, l=40, r=40),
            paper_bgcolor='white',
            plot_bgcolor='white'
        )
        return fig

    def maxarea_chart(self, samples: pd.DataFrame, optimum: float) -> go.Figure:
        """Areas of the isometric competitors with the solved optimum as a line."""
        fig = px.scatter(
            samples,
            x="sample",
            y="area",
            title="Competitor areas",
            color_discrete_sequence=['#6b7280']
        )
        fig.add_hline(y=optimum, line_color='#3b82f6', annotation_text="critical polygon")
        fig.update_layout(
            height=350,
            margin=dict(t=40, b=40, l=40, r=40),
            paper_bgcolor='white',
            plot_bgcolor='white'
        )
        return fig

    def eigenvalue_chart(self, eigenvalues, title: str) -> go.Figure:
        fig = go.Figure()
        fig.add_trace(go.Bar(x=list(range(len(eigenvalues))), y=list(eigenvalues), marker_color='#3b82f6'))
        fig.update_layout(title=title, height=300, paper_bgcolor='white', plot_bgcolor='white')
        return fig
