from django.http import JsonResponse
from django.views.decorators.http import require_http_methods

from experiments.models import ExperimentRun


@require_http_methods(["GET"])
def run_list(request):
    """Most recent runs first, without their rows; ?status= filters"""
    runs = ExperimentRun.objects.all()
    status = request.GET.get('status')
    if status: runs = runs.filter(status=status)
    return JsonResponse({'runs': [run.to_dict() for run in runs]})


@require_http_methods(["GET"])
def run_detail(request, run_id):
    try:
        run = ExperimentRun.objects.get(pk=run_id)
    except ExperimentRun.DoesNotExist:
        return JsonResponse({'error': 'Run not found'}, status=404)
    return JsonResponse(run.to_dict(include_rows=True))
