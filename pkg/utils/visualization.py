import plotly.graph_objects as go

from models.update_models import DISPLAY_LABELS


class VisualizationUtils:
    def __init__(self):
        # Colors for the compared series
        self.color_schemes = {
            'models': {
                'primary': '#EF553B',
                'baseline': '#636EFA',
            },
            'divergence': 'Blues',
        }

    def create_mae_comparison_chart(self, series, primary='social_bayesian'):
        """Per-round MAE of the primary model vs. the next best model"""
        fig = go.Figure()
        if series.empty:
            return fig

        rounds = [str(r) for r in series['round_id']]
        fig.add_trace(go.Bar(
            x=rounds,
            y=series[primary],
            name=DISPLAY_LABELS.get(primary, primary),
            marker=dict(color=self.color_schemes['models']['primary'])
        ))
        fig.add_trace(go.Bar(
            x=rounds,
            y=series['best_baseline_mae'],
            name='Best baseline',
            marker=dict(color=self.color_schemes['models']['baseline']),
            text=list(series['best_baseline']),
        ))

        fig.update_layout(
            title="Mean Absolute Error vs. next best model",
            xaxis_title="Round",
            yaxis_title="MAE",
            barmode='group',
            template='none',
        )
        return fig

    def create_kl_heatmap(self, matrix):
        """Heatmap of pairwise KL divergences between users"""
        labels = [str(label) for label in matrix.index]
        fig = go.Figure(go.Heatmap(
            z=matrix.to_numpy(),
            x=labels,
            y=labels,
            colorscale=self.color_schemes['divergence'],
            colorbar=dict(title='nats'),
        ))
        fig.update_layout(title="KL divergence between belief distributions", template='none')
        return fig

    def figure_to_json(self, fig, destination=None):
        """Serialize a figure to plotly JSON, optionally writing it to destination"""
        text = fig.to_json(pretty=False)
        if destination is not None:
            with open(destination, 'w', encoding='utf-8') as f:
                f.write(text)
        return text
