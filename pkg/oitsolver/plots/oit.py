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
    id_vars=["x"],
    value_vars=["f", "f_roundtrip"],
    var_name="curve",
    value_name="value",
)

fig = px.line(
    long,
    x="x",
    y="value",
    color="curve",
    line_dash="curve",
    template="plotly_white",
)

fig.update_layout(
    title="Explore <b>Transform Round Trip</b> <br>max abs error {:.3g}".format(
        df["abs_err"].max()
    ),
    title_x=0.5,
    legend_title="",
)

fig.write_html(options["output"])
