"""
Training run browser: registry runs and their loss curves.
"""

import streamlit as st
import plotly.graph_objects as go

from app.services.registry_service import RegistryService


def show_training_runs():
    """Display recorded training runs with plotly loss curves."""
    st.markdown("# 📉 Training Runs")
    st.markdown("*Loss curves of stage-1 and stage-2 runs recorded in the registry*")
    st.markdown("---")

    try:
        registry = RegistryService()
        runs = registry.runs_frame()
    except Exception as e:
        st.error(f"❌ Error reading the run registry: {str(e)}")
        st.exception(e)
        return

    if runs.empty:
        st.info("No training runs recorded yet.")
        return

    stage = st.radio("Stage", ["All", "Stage 1", "Stage 2"], horizontal=True)
    if stage != "All":
        runs = runs[runs['stage'] == int(stage[-1])]
    st.dataframe(runs, use_container_width=True)
    if runs.empty:
        return

    labels = {f"#{row.id} stage {row.stage} ({row.preset or row.query_mode}, {row.status})": row.id
              for row in runs.itertuples()}
    selected = st.multiselect("Runs to plot", list(labels), default=list(labels)[-1:])

    fig = go.Figure()
    for label in selected:
        losses = registry.loss_frame(labels[label])
        if losses.empty:
            continue
        fig.add_trace(go.Scatter(x=losses['step'], y=losses['loss'], mode='lines', name=label))

    log_scale = st.checkbox("Logarithmic loss axis", value=True)
    fig.update_layout(
        title="Training loss",
        xaxis_title="Step",
        yaxis_title="Loss",
        yaxis_type="log" if log_scale else "linear",
        height=450,
    )
    st.plotly_chart(fig, use_container_width=True)
