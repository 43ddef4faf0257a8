"""
Scene viewer: bird's-eye class maps of a dataset and its predictions.
"""

from pathlib import Path

import numpy as np
import streamlit as st
import plotly.graph_objects as go

from app.config.presets import get_preset, get_preset_names
from app.config.run_config import load_config
from app.services.dataset_service import DatasetService
from app.voxel import IGNORE_LABEL, load_occupancy, load_voxel_grid

PALETTE = ["#ffffff", "#e74c3c", "#2ecc71", "#3498db", "#f1c40f", "#9b59b6",
           "#e67e22", "#1abc9c", "#34495e", "#d35400"]
IGNORE_COLOR = "#bdc3c7"


def label_colorscale(class_count: int):
    """Discrete plotly colorscale for labels 0..class_count plus the ignore label."""
    colors = [PALETTE[c % len(PALETTE)] if c else PALETTE[0] for c in range(class_count + 1)]
    colors.append(IGNORE_COLOR)
    n = len(colors)
    scale = []
    for i, color in enumerate(colors):
        scale.append([i / n, color])
        scale.append([(i + 1) / n, color])
    return scale


def top_view_figure(top: np.ndarray, class_count: int, title: str) -> go.Figure:
    # Ignored columns are drawn after the last class
    shown = np.where(top == IGNORE_LABEL, class_count + 1, top).astype(float)
    fig = go.Figure(data=go.Heatmap(
        z=shown,
        zmin=-0.5,
        zmax=class_count + 1.5,
        colorscale=label_colorscale(class_count),
        colorbar=dict(tickvals=list(range(class_count + 2)),
                      ticktext=["empty"] + [f"class {c}" for c in range(1, class_count + 1)] + ["ignored"]),
    ))
    fig.update_layout(
        title=title,
        xaxis_title="y index (lateral)",
        yaxis_title="x index (forward)",
        height=420,
    )
    fig.update_yaxes(scaleanchor="x")
    return fig


@st.cache_resource(show_spinner=False)
def _load_samples(dataset_dir: str, preset: str, config_path: str):
    config = load_config(config_path, get_preset(preset)) if config_path else get_preset(preset)
    return config, DatasetService(config).load(dataset_dir)


def show_scene_viewer():
    """Display ground truth, M_in and predicted labels of one scene from above."""
    st.markdown("# 🗺️ Scene Viewer")
    st.markdown("*Highest label in every column of the output grid, seen from above*")
    st.markdown("---")

    col1, col2, col3 = st.columns(3)
    with col1:
        dataset_dir = st.text_input("Dataset directory", value="")
    with col2:
        preset = st.selectbox("Preset", get_preset_names())
    with col3:
        config_path = st.text_input("Config file (optional)", value="")
    prediction_dir = st.text_input("Prediction directory from `ssc.py infer` (optional)", value="")

    if not dataset_dir:
        st.info("Enter a directory written by `python ssc.py synth`.")
        return
    try:
        config, samples = _load_samples(dataset_dir, preset, config_path)
    except Exception as e:
        st.error(f"❌ Error loading dataset: {str(e)}")
        return

    names = [s.name for s in samples]
    sample = samples[names.index(st.selectbox("Scene", names))]
    spec = config.volume_spec()
    with st.expander("Generation settings"):
        st.code(DatasetService(config).describe(), language="ini")

    col1, col2, col3 = st.columns(3)
    with col1:
        st.metric("Objects", len(sample.scene.objects))
    with col2:
        st.metric("Occupied voxels", sample.gt.occupancy().popcount)
    with col3:
        st.metric("M_in voxels", sample.m_in.popcount)

    col1, col2 = st.columns(2)
    with col1:
        st.plotly_chart(top_view_figure(sample.gt.top_view(), config.class_count, "Ground truth"),
                        use_container_width=True)
    with col2:
        m_in = sample.m_in.bits.any(axis=2).astype(np.uint8)
        st.plotly_chart(top_view_figure(m_in, 1, "Depth occupancy M_in"), use_container_width=True)

    if not prediction_dir:
        return
    pred_path = Path(prediction_dir) / f"{sample.name}_pred.vox"
    m_out_path = Path(prediction_dir) / f"{sample.name}_m_out.vox"
    if not pred_path.is_file():
        st.warning(f"No prediction for {sample.name} in {prediction_dir}")
        return

    prediction = load_voxel_grid(pred_path, spec)
    col1, col2 = st.columns(2)
    with col1:
        st.plotly_chart(top_view_figure(prediction.top_view(), config.class_count, "Prediction"),
                        use_container_width=True)
    with col2:
        if m_out_path.is_file():
            m_out = load_occupancy(m_out_path, spec).bits.any(axis=2).astype(np.uint8)
            st.plotly_chart(top_view_figure(m_out, 1, "Query proposals M_out"), use_container_width=True)
    agreement = float((prediction.labels == sample.gt.labels)[sample.gt.observed].mean())
    st.metric("Voxel label agreement", f"{100 * agreement:.2f}%")
