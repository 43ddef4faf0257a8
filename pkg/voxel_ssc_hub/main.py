"""
Main Streamlit application for the Voxel SSC Hub run dashboard.
"""

import streamlit as st
import sys
import os

# Add the current directory to Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from app.config.presets import PRESETS
from app.database.config import DATABASE_PATH
from app.database.manager import get_database_manager
from app.services.registry_service import RegistryService
from pages.training_runs import show_training_runs
from pages.evaluations import show_evaluations
from pages.scene_viewer import show_scene_viewer


def ensure_database_initialized():
    """
    Ensure the run registry exists and is initialized.
    """
    try:
        # Keep the console quiet while Streamlit reruns the script
        os.environ['SSC_SILENT'] = '1'
        success = get_database_manager().initialize(verify_schema=False)
        if not success:
            st.error("Failed to initialize the run registry. Check logs for details.")
            return False
        return True
    except Exception as e:
        st.error(f"Error initializing the run registry: {str(e)}")
        return False


# Initialize database on app start (only once per session)
if 'db_initialized' not in st.session_state:
    ensure_database_initialized()
    st.session_state.db_initialized = True

# Page configuration
st.set_page_config(
    page_title="Voxel SSC Hub",
    page_icon="🧊",
    layout="wide",
    initial_sidebar_state="expanded"
)

st.markdown("""
<style>
    .main-header {
        background: linear-gradient(90deg, #1f4e79 0%, #2e86c1 50%, #85c1e9 100%);
        padding: 1rem;
        border-radius: 10px;
        margin-bottom: 2rem;
    }
    .main-header h1 {
        color: white;
        text-align: center;
        margin: 0;
    }
</style>
""", unsafe_allow_html=True)


def main():
    """Main application function."""
    st.markdown("""
    <div class="main-header">
        <h1>🧊 Voxel SSC Hub</h1>
        <p style="text-align: center; color: white; margin: 0;">
            Camera-based semantic scene completion • Training and evaluation runs
        </p>
    </div>
    """, unsafe_allow_html=True)

    st.sidebar.title("🧭 Navigation")
    st.sidebar.markdown("---")

    pages = {
        "🏠 Dashboard": "dashboard",
        "📉 Training Runs": "training",
        "📊 Evaluations": "evaluations",
        "🗺️ Scene Viewer": "scenes",
    }

    selected_page = st.sidebar.selectbox(
        "Select a module:",
        list(pages.keys()),
        index=0
    )
    st.sidebar.markdown("---")
    st.sidebar.caption(f"Registry: {DATABASE_PATH}")

    page_key = pages[selected_page]
    try:
        if page_key == "dashboard":
            show_dashboard()
        elif page_key == "training":
            show_training_runs()
        elif page_key == "evaluations":
            show_evaluations()
        elif page_key == "scenes":
            show_scene_viewer()
        else:
            st.error(f"Page '{page_key}' not found. Please select a valid page from the sidebar.")
    except Exception as e:
        st.error(f"❌ Error loading page: {str(e)}")
        st.exception(e)


def show_dashboard():
    """Display registry totals, the latest runs and the presets."""
    st.header("📊 Dashboard")

    registry = RegistryService()
    runs = registry.runs_frame()
    evaluations = registry.evaluation_frame()
    datasets = registry.list_datasets()

    col1, col2, col3, col4 = st.columns(4)
    with col1:
        st.metric("Datasets", len(datasets))
    with col2:
        st.metric("Training Runs", len(runs))
    with col3:
        finished = int((runs['status'] == 'finished').sum()) if not runs.empty else 0
        st.metric("Finished Runs", finished)
    with col4:
        st.metric("Evaluations", len(evaluations))

    col1, col2 = st.columns(2)
    with col1:
        st.subheader("📉 Latest Runs")
        if runs.empty:
            st.info("No training runs recorded yet. Train with `python ssc.py train ...`.")
        else:
            st.dataframe(runs.tail(10)[['id', 'stage', 'status', 'steps', 'final_loss', 'preset']],
                         use_container_width=True)
    with col2:
        st.subheader("📊 Latest Evaluations")
        if evaluations.empty:
            st.info("No evaluations recorded yet. Evaluate with `python ssc.py eval ...`.")
        else:
            st.dataframe(evaluations.tail(10)[['label', 'query_mode', 'range_m', 'IoU', 'mIoU']],
                         use_container_width=True)

    with st.expander("⚙️ Presets"):
        for name, preset in PRESETS.items():
            st.markdown(f"**{name}**: {preset['description']}")


if __name__ == "__main__":
    main()
