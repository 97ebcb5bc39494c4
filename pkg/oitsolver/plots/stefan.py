import plotly.graph_objects as go
import pyarrow.feather as feather

from optparse import OptionParser
from plotly.subplots import make_subplots


parser = OptionParser()
parser.add_option(
    "-f",
    "--file",
    type="string",
    default=None,
    help="Feather file with the run table",
    metavar="FILE",
)
parser.add_option(
    "-o",
    "--output",
    type="string",
    default=None,
    help="Name of the output file",
    metavar="output",
)

(options, args) = parser.parse_args()
options = vars(options)

df = feather.read_feather(options["file"])

if df.empty:
    quit()

fig = make_subplots(
    rows=2,
    cols=1,
    shared_xaxes=True,
    subplot_titles=("Interface position", "Gradient jump"),
)

fig.add_trace(go.Scatter(x=df["tau"], y=df["y"], mode="lines+markers", name="y (mm)"), row=1, col=1)
fig.add_trace(
    go.Scatter(x=df["tau"], y=df["gradient_jump"], mode="lines", name="kappa jump"),
    row=2,
    col=1,
)
fig.add_trace(
    go.Scatter(x=df["tau"], y=df["latent_rhs"], mode="lines", line=dict(dash="dash"), name="rho L y'"),
    row=2,
    col=1,
)

fig.update_layout(
    template="plotly_white",
    title="Explore <b>Freezing Front</b>",
    title_x=0.5,
    height=900,
)
fig.update_xaxes(title_text="tau (s)", row=2, col=1)

fig.write_html(options["output"])
