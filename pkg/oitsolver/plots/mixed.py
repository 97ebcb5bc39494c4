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

fig = px.scatter(
    df,
    x="lambda_real",
    y="lambda_imag",
    color="kind",
    symbol="kind",
    hover_data=["n", "residual"],
    template="plotly_white",
)

fig.update_layout(
    title="Explore <b>Poles on the Second Sheet</b>",
    title_x=0.5,
    xaxis_title="Re lambda",
    yaxis_title="Im lambda",
    legend_title="",
)

fig.write_html(options["output"])
