from celery import Celery
import os

# Set Django settings module
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'sortition_lab.settings')

# Long experiment runs are queued here instead of blocking a command
app = Celery('sortition_lab')

# Load configuration from Django settings
app.config_from_object('django.conf:settings', namespace='CELERY')

# Picks up experiments.tasks
app.autodiscover_tasks()
