from setuptools import setup, find_packages

tests_require = ['pytest',
                 ]

setup(name='floquet-tripling',
      version='0.1',
      description='Quasienergy spectra, dissipative kinetics and escape of a period-tripling driven oscillator.',
      license='Apache2',
      entry_points={
          'console_scripts': [
              'floquet-tripling=period3.cli:execute_from_command_line',
          ],
      },
      setup_requires=['pytest-runner'],
      install_requires=['docopt',
                        'numpy',
                        'scipy',
                        ],
      tests_require=tests_require,
      extras_require={
          'tests': tests_require
      },

      include_package_data=True,

      classifiers=[
          # How mature is this project? Common values are
          #   3 - Alpha
          #   4 - Beta
          #   5 - Production/Stable
          'Development Status :: 3 - Alpha',

          'Intended Audience :: Science/Research',
          'Topic :: Scientific/Engineering :: Physics',

          'License :: OSI Approved :: Apache Software License',

          'Programming Language :: Python :: 3.7',
      ],
      keywords='floquet quantum-activation period-tripling master-equation',

      packages=find_packages(exclude=(['tests', 'env'])),
      )
