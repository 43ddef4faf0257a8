"""
Evaluation browser: range-stratified metrics and per-class IoU.
"""

from pathlib import Path

import streamlit as st
import plotly.express as px
import plotly.graph_objects as go

from app.losses.metrics import class_names, load_report, report_frame
from app.models import EvaluationRecord
from app.services.registry_service import RegistryService


def show_evaluations():
    """Display recorded evaluations, IoU/mIoU by range and per-class IoU bars."""
    st.markdown("# 📊 Evaluations")
    st.markdown("*Completion quality within 3.2 m, 6.4 m and 12.8 m of the ego vehicle*")
    st.markdown("---")

    try:
        registry = RegistryService()
        evaluations = registry.evaluation_frame()
    except Exception as e:
        st.error(f"❌ Error reading the run registry: {str(e)}")
        st.exception(e)
        return

    if evaluations.empty:
        st.info("No evaluations recorded yet.")
        return

    st.dataframe(evaluations.round(2), use_container_width=True)

    evaluations['name'] = evaluations['label'].fillna(evaluations['query_mode'])
    col1, col2 = st.columns(2)
    for column, metric in ((col1, 'IoU'), (col2, 'mIoU')):
        with column:
            fig = px.bar(evaluations, x='range_m', y=metric, color='name', barmode='group',
                         labels={'range_m': 'Range (m)', metric: f"{metric} (%)"},
                         title=f"{metric} by range")
            fig.update_xaxes(type='category')
            st.plotly_chart(fig, use_container_width=True)

    st.markdown("### 🏷️ Per-class IoU")
    records = registry.db.query(EvaluationRecord).filter(EvaluationRecord.report_path.isnot(None)).all()
    report_paths = sorted({r.report_path for r in records if Path(r.report_path).is_file()})
    if not report_paths:
        st.info("No report files found on disk for the recorded evaluations.")
        return

    path = st.selectbox("Report", report_paths)
    report = load_report(path)
    frame = report_frame(report)
    st.dataframe(frame, use_container_width=True)

    names = class_names(report.class_count)
    fig = go.Figure()
    for row in frame.itertuples(index=False):
        row = row._asdict()
        fig.add_trace(go.Bar(x=names, y=[row[n] for n in names], name=f"{row['range_m']:g} m"))
    fig.update_layout(
        title="Per-class IoU (%)",
        xaxis_title="Class",
        yaxis_title="IoU (%)",
        barmode='group',
        height=400,
    )
    st.plotly_chart(fig, use_container_width=True)
