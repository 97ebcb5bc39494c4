import plotly.express as px
import pyarrow.feather as feather

from optparse import OptionParser


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

long = df.melt(
    id_vars=["n"],
    value_vars=["rel_err0", "rel_err1"],
    var_name="approximation",
    value_name="relative error",
)
long["approximation"] = long["approximation"].map(
    {"rel_err0": "zero order", "rel_err1": "first order"}
)

fig = px.line(
    long,
    x="n",
    y="relative error",
    color="approximation",
    markers=True,
    log_y=True,
    template="plotly_white",
)

fig.update_layout(
    title="Explore <b>Eigenvalue Approximations</b>",
    title_x=0.5,
    xaxis_title="Eigenvalue index n",
    legend_title="",
)

fig.write_html(options["output"])
